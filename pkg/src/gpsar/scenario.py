"""YAML experiment description: parsing, validation, defaults and emission.

Every block is optional; omitted keys take the defaults listed in
``README.md``. Unknown keys are rejected so typos cannot silently fall
back to defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np
import yaml

from .detection import CfarParams
from .geometry import CircleSpec, Transform
from .imaging import GridSpec
from .motion import FilterConfig, ImuSpec, PrismSpec
from .signal import AntennaPattern, RadarParams, Scatterer, Scene

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Raised for malformed or invalid scenario text."""


@dataclass(frozen=True)
class ApertureSpec:
    center: tuple = (0.0, 0.0)
    radius: float = 7.75
    height: float = 3.75
    speed: float = 0.4
    start_azimuth_deg: float = 0.0
    arc_deg: float = 360.0

    def circle(self, prf: float) -> CircleSpec:
        return CircleSpec((self.center[0], self.center[1], 0.0), self.radius, self.height, self.speed, prf,
                          np.deg2rad(self.start_azimuth_deg), np.deg2rad(self.arc_deg))


@dataclass(frozen=True)
class TargetSpec:
    id: int
    position: tuple
    amplitude: float = 1.0
    visibility_deg: tuple | None = None

    def scatterer(self) -> Scatterer:
        vis = None
        if self.visibility_deg is not None:
            vis = tuple((np.deg2rad(a), np.deg2rad(b)) for a, b in self.visibility_deg)
        return Scatterer(np.array(self.position), self.amplitude, vis)


@dataclass(frozen=True)
class SceneSpec:
    er: float = 8.0
    interface_z: float = 0.0
    noise_std: float = 0.0
    targets: tuple = ()

    def build(self) -> Scene:
        return Scene(self.interface_z, self.er, tuple(t.scatterer() for t in self.targets), self.noise_std)


@dataclass(frozen=True)
class GridConfig:
    center: tuple = (0.0, 0.0)
    half_extent: tuple = (0.32, 0.32)
    pitch: float = 0.005
    z_top: float = 0.1
    z_bottom: float = -0.2
    dz: float = 0.005

    def build(self) -> GridSpec:
        return GridSpec.centered(self.center[0], self.center[1], self.half_extent[0], self.half_extent[1],
                                 self.pitch, self.z_top, self.z_bottom, self.dz)


@dataclass(frozen=True)
class Mount:
    """Rigid sensor mount in the body frame; angles are roll, pitch, yaw in degrees."""

    translation: tuple = (0.0, 0.0, 0.0)
    rpy_deg: tuple = (0.0, 0.0, 0.0)

    def transform(self) -> Transform:
        r, p, y = np.deg2rad(self.rpy_deg)
        return Transform.from_euler(r, p, y, self.translation)


# antennas look toward the circle center (body +y) with 25.8 deg depression
_LOOK = (0.0, 25.8, 90.0)


@dataclass(frozen=True)
class MotionConfig:
    noise: bool = True
    imu: ImuSpec = field(default_factory=ImuSpec)
    prism: PrismSpec = field(default_factory=PrismSpec)
    heading_std_deg: float = 2.0
    t_bp: Mount = Mount((0.0, 0.0, 0.2))
    t_ba1: Mount = Mount((0.2, 0.0, 0.0), _LOOK)
    t_ba2: Mount = Mount((-0.2, 0.0, 0.0), _LOOK)

    def sensor_specs(self) -> tuple[ImuSpec, PrismSpec, float]:
        if self.noise:
            return self.imu, self.prism, np.deg2rad(self.heading_std_deg)
        return (ImuSpec.noise_free(self.imu.rate),
                PrismSpec.noise_free(self.prism.rate, self.prism.station), 0.0)

    def filter_config(self) -> FilterConfig:
        return FilterConfig(imu=self.imu, prism=self.prism,
                            init_heading_std=np.deg2rad(max(self.heading_std_deg, 0.01)))


@dataclass(frozen=True)
class AntennaConfig:
    pattern: bool = False
    horizontal_deg: float = 50.0
    vertical_deg: float = 60.0

    def build(self) -> AntennaPattern | None:
        if not self.pattern:
            return None
        return AntennaPattern(np.deg2rad(self.horizontal_deg), np.deg2rad(self.vertical_deg))


@dataclass(frozen=True)
class ProcessingConfig:
    pad_factor: int = 16
    chirp_stride: int = 1
    mode: str = "bistatic"
    er: float | None = None  # focusing permittivity; scene value when unset
    clip_db: float = 40.0


@dataclass(frozen=True)
class AnalysisConfig:
    box_half_extent: tuple = (0.25, 0.25)
    hist_bins: int = 100
    hist_range_db: tuple = (-60.0, 0.0)
    hist_planes_mm: tuple = (0.0, -50.0, -100.0)
    group_radius: float = 0.15
    score_radius: float = 0.25


@dataclass(frozen=True)
class Scenario:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    radar: RadarParams = field(default_factory=RadarParams)
    apertures: tuple = (ApertureSpec(),)
    scene: SceneSpec = field(default_factory=SceneSpec)
    grid: GridConfig = field(default_factory=GridConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    antenna: AntennaConfig = field(default_factory=AntennaConfig)
    processing: ProcessingConfig = field(default_factory=ProcessingConfig)
    cfar: CfarParams = field(default_factory=CfarParams)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    @property
    def focus_er(self) -> float:
        return self.scene.er if self.processing.er is None else self.processing.er

    def circles(self) -> list[CircleSpec]:
        return [a.circle(self.radar.prf) for a in self.apertures]

    def parameter_hash(self) -> str:
        return hashlib.sha256(emit(self).encode()).hexdigest()


# --- conversion helpers --------------------------------------------------------


def _fail(path: str, msg: str):
    raise ScenarioError(f"{path}: {msg}")


def _number(v, path, *, positive=False, nonneg=False, minimum=None, integer=False):
    if isinstance(v, str):
        # YAML 1.1 reads exponents without a sign (1.0e9) as strings
        try:
            v = float(v)
        except ValueError:
            pass
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            _fail(path, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not np.isfinite(v):
            _fail(path, "must be finite")
    if positive and not v > 0:
        _fail(path, f"must be positive, got {v!r}")
    if nonneg and not v >= 0:
        _fail(path, f"must be >= 0, got {v!r}")
    if minimum is not None and v < minimum:
        _fail(path, f"must be >= {minimum}, got {v!r}")
    return v


def _vector(v, path, n, **kw):
    if not isinstance(v, (list, tuple)) or len(v) != n:
        _fail(path, f"expected a list of {n} numbers")
    return tuple(_number(x, f"{path}[{i}]", **kw) for i, x in enumerate(v))


def _mapping(v, path) -> dict:
    if v is None:
        return {}
    if not isinstance(v, dict):
        _fail(path, "expected a mapping")
    return v


def _check_keys(m: dict, allowed, path: str):
    for k in m:
        if k not in allowed:
            where = f"{path}.{k}" if path else str(k)
            _fail(where, f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _flat(cls, m, path, conv):
    """Build dataclass ``cls`` from mapping ``m`` using per-field converters."""
    m = _mapping(m, path)
    _check_keys(m, conv, path)
    kw = {k: conv[k](m[k], f"{path}.{k}") for k in m}
    try:
        return cls(**kw)
    except ScenarioError:
        raise
    except ValueError as exc:
        msg = str(exc)
        name = next((k for k in kw if msg.startswith(k + " ")), None)
        _fail(f"{path}.{name}" if name else path, msg)


def _num(**kw):
    return lambda v, p: _number(v, p, **kw)


def _vec(n, **kw):
    return lambda v, p: _vector(v, p, n, **kw)


def _floats(v, path):
    if not isinstance(v, (list, tuple)) or not v:
        _fail(path, "expected a non-empty list of numbers")
    return tuple(_number(x, f"{path}[{i}]") for i, x in enumerate(v))


def _bool(v, path):
    if not isinstance(v, bool):
        _fail(path, f"expected true or false, got {v!r}")
    return v


def _radar(m, path):
    pos = _num(positive=True)
    return _flat(RadarParams, m, path, {k: pos for k in ("f0", "bandwidth", "chirp_duration", "fs", "prf")})


def _aperture(m, path):
    conv = {"center": _vec(2), "radius": _num(positive=True), "height": _num(positive=True),
            "speed": _num(positive=True), "start_azimuth_deg": _num(), "arc_deg": _num(positive=True)}
    return _flat(ApertureSpec, m, path, conv)


def _visibility(v, path):
    if v is None:
        return None
    if not isinstance(v, (list, tuple)) or not v:
        _fail(path, "expected a non-empty list of [start, stop] pairs")
    return tuple(_vector(iv, f"{path}[{i}]", 2) for i, iv in enumerate(v))


def _target(m, path):
    m = _mapping(m, path)
    if "position" not in m:
        _fail(f"{path}.position", "required")
    if "id" not in m:
        _fail(f"{path}.id", "required")
    conv = {"id": _num(integer=True, nonneg=True), "position": _vec(3), "amplitude": _num(nonneg=True),
            "visibility_deg": _visibility}
    return _flat(TargetSpec, m, path, conv)


def _scene(m, path):
    m = dict(_mapping(m, path))
    raw = m.pop("targets", [])
    if not isinstance(raw, list):
        _fail(f"{path}.targets", "expected a list")
    targets = tuple(_target(t, f"{path}.targets[{i}]") for i, t in enumerate(raw))
    ids = [t.id for t in targets]
    if len(set(ids)) != len(ids):
        _fail(f"{path}.targets", "target ids must be unique")
    conv = {"er": _num(minimum=1.0), "interface_z": _num(), "noise_std": _num(nonneg=True)}
    spec = _flat(SceneSpec, m, path, conv)
    return SceneSpec(spec.er, spec.interface_z, spec.noise_std, targets)


def _grid(m, path):
    conv = {"center": _vec(2), "half_extent": _vec(2, nonneg=True), "pitch": _num(positive=True),
            "z_top": _num(), "z_bottom": _num(), "dz": _num(positive=True)}
    g = _flat(GridConfig, m, path, conv)
    if g.z_bottom > g.z_top:
        _fail(f"{path}.z_bottom", "must not lie above z_top")
    return g


def _mount(m, path):
    return _flat(Mount, m, path, {"translation": _vec(3), "rpy_deg": _vec(3)})


def _imu(m, path):
    conv = {"rate": _num(positive=True), "gyro_noise_density": _num(nonneg=True),
            "accel_noise_density": _num(nonneg=True), "gyro_bias_std": _num(nonneg=True),
            "accel_bias_std": _num(nonneg=True)}
    return _flat(ImuSpec, m, path, conv)


def _prism(m, path):
    conv = {"rate": _num(positive=True), "range_std": _num(nonneg=True), "angle_std": _num(nonneg=True),
            "station": _vec(3), "time_offset": _num()}
    return _flat(PrismSpec, m, path, conv)


def _motion(m, path):
    conv = {"noise": _bool, "imu": _imu, "prism": _prism, "heading_std_deg": _num(nonneg=True),
            "t_bp": _mount, "t_ba1": _mount, "t_ba2": _mount}
    return _flat(MotionConfig, m, path, conv)


def _antenna(m, path):
    conv = {"pattern": _bool, "horizontal_deg": _num(positive=True), "vertical_deg": _num(positive=True)}
    return _flat(AntennaConfig, m, path, conv)


def _mode(v, path):
    if v not in ("bistatic", "monostatic"):
        _fail(path, f"expected 'bistatic' or 'monostatic', got {v!r}")
    return v


def _processing(m, path):
    conv = {"pad_factor": _num(integer=True, minimum=1), "chirp_stride": _num(integer=True, minimum=1),
            "mode": _mode, "er": lambda v, p: None if v is None else _number(v, p, minimum=1.0),
            "clip_db": _num(positive=True)}
    return _flat(ProcessingConfig, m, path, conv)


def _cfar(m, path):
    conv = {"guard": _num(integer=True, nonneg=True), "train": _num(integer=True, minimum=1),
            "pfa": _num(positive=True)}
    return _flat(CfarParams, m, path, conv)


def _analysis(m, path):
    conv = {"box_half_extent": _vec(2, positive=True), "hist_bins": _num(integer=True, minimum=2),
            "hist_range_db": _vec(2), "hist_planes_mm": _floats,
            "group_radius": _num(positive=True), "score_radius": _num(positive=True)}
    a = _flat(AnalysisConfig, m, path, conv)
    if a.hist_range_db[0] >= a.hist_range_db[1]:
        _fail(f"{path}.hist_range_db", "lower bound must be below upper bound")
    return a


_TOP = {
    "schema_version": None, "seed": None, "radar": _radar, "apertures": None, "scene": _scene,
    "grid": _grid, "motion": _motion, "antenna": _antenna, "processing": _processing,
    "cfar": _cfar, "analysis": _analysis,
}


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario YAML; every omitted field takes its default."""
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ScenarioError(f"syntax error at {where}: {exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"syntax error: {exc}") from None
    doc = _mapping(doc, "scenario")
    _check_keys(doc, _TOP, "")

    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
    seed = _number(doc.get("seed", 0), "seed", integer=True, nonneg=True)
    if seed >= 2**64:
        _fail("seed", "must fit in 64 bits")

    kw = {k: _TOP[k](doc.get(k), k) for k in _TOP if _TOP[k] is not None}
    if "apertures" in doc:
        raw = doc["apertures"]
        if not isinstance(raw, list) or not raw:
            _fail("apertures", "expected a non-empty list")
        kw["apertures"] = tuple(_aperture(a, f"apertures[{i}]") for i, a in enumerate(raw))
    sc = Scenario(schema_version=version, seed=seed, **kw)
    _cross_check(sc)
    return sc


def _cross_check(sc: Scenario) -> None:
    for i, a in enumerate(sc.apertures):
        if a.height <= sc.scene.interface_z:
            _fail(f"apertures[{i}].height", "aperture must fly above the interface")
        try:
            a.circle(sc.radar.prf).validate()
        except ValueError as exc:
            _fail(f"apertures[{i}]", str(exc))
    w = sc.cfar.window
    g = sc.grid.build()
    if min(g.nx, g.ny) < w:
        _fail("cfar", f"{w}x{w} window does not fit the {g.ny}x{g.nx} grid")


def _plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def emit(sc: Scenario) -> str:
    """Fully resolved YAML text; ``parse_scenario(emit(s)) == s``."""
    return yaml.safe_dump(_plain(sc), sort_keys=False, default_flow_style=None)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read())


def bundled_scenario_text() -> str:
    """Six-circle, fifteen-target field protocol shipped with the package."""
    return resources.files(__package__).joinpath("data/field_protocol.yaml").read_text()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)
