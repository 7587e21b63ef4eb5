"""FMCW dechirped echo synthesis and range compression.

The simulator works in complex baseband: a point target at round-trip
delay ``dt`` produces the beat tone

    A * exp(j * (2*pi*f0*dt + 2*pi*K*dt*t - pi*K*dt**2))

sampled at ``t = n / fs``. :func:`matched_phase` returns the constant part
of that phase and is used by the focusing kernel, so a point target
focuses with zero phase at its true position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .geometry import Pose, apply, inverse
from .geometry import C0
from .propagation import round_trip_time, wave_speed


@dataclass(frozen=True)
class RadarParams:
    f0: float = 1e9
    bandwidth: float = 3e9
    chirp_duration: float = 1024e-6
    fs: float = 4e6
    prf: float = 30.0

    def __post_init__(self):
        for name in ("f0", "bandwidth", "chirp_duration", "fs", "prf"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        n = self.fs * self.chirp_duration
        if abs(n - round(n)) > 1e-6:
            raise ValueError("fs * chirp_duration must be an integer sample count")

    @property
    def slope(self) -> float:
        return self.bandwidth / self.chirp_duration

    @property
    def n_samples(self) -> int:
        return int(round(self.fs * self.chirp_duration))

    def delay_per_bin(self, pad_factor: int) -> float:
        return self.fs / (pad_factor * self.n_samples * self.slope)

    @property
    def max_delay(self) -> float:
        """Largest delay whose beat frequency stays below ``fs``."""
        return self.fs / self.slope


@njit(cache=True, nogil=True)
def matched_phase(delay, f0, slope):
    return 2.0 * np.pi * f0 * delay - np.pi * slope * delay * delay


@dataclass(frozen=True, eq=False)
class Scatterer:
    """Point scatterer.

    ``visibility`` is a list of ``(start, stop)`` azimuth intervals in
    radians, measured at the scatterer toward the transmitter and going
    counter-clockwise from ``start`` to ``stop`` (wrapping allowed).
    ``None`` means isotropic.
    """

    position: np.ndarray
    amplitude: float = 1.0
    visibility: tuple | None = None

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("scatterer position must be finite")
        object.__setattr__(self, "position", pos)
        if not self.amplitude >= 0:
            raise ValueError("scatterer amplitude must be >= 0")
        if self.visibility is not None:
            vis = tuple((float(a) % (2 * np.pi), float(b) % (2 * np.pi)) for a, b in self.visibility)
            object.__setattr__(self, "visibility", vis)

    def visible_from(self, point) -> bool:
        if self.visibility is None:
            return True
        d = np.asarray(point, dtype=float) - self.position
        az = np.arctan2(d[1], d[0]) % (2 * np.pi)
        for start, stop in self.visibility:
            if start <= stop:
                if start <= az <= stop:
                    return True
            elif az >= start or az <= stop:
                return True
        return False


@dataclass(frozen=True, eq=False)
class Scene:
    interface_z: float = 0.0
    er: float = 8.0
    scatterers: tuple = ()
    noise_std: float = 0.0

    def __post_init__(self):
        if not self.er >= 1.0:
            raise ValueError(f"er must be >= 1, got {self.er!r}")
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be >= 0")
        object.__setattr__(self, "scatterers", tuple(self.scatterers))


@dataclass(frozen=True)
class AntennaPattern:
    """Separable cosine-power two-way amplitude taper.

    Boresight is the antenna-frame +x axis; ``horizontal`` and ``vertical``
    are full 3 dB beamwidths (rad) in the antenna x-y and x-z planes.
    """

    horizontal: float = np.deg2rad(50.0)
    vertical: float = np.deg2rad(60.0)

    def gain(self, pose: Pose, point) -> float:
        d = apply(inverse(pose.transform), point)
        az = np.arctan2(d[1], d[0])
        el = np.arctan2(d[2], np.hypot(d[0], d[1]))
        if abs(az) >= np.pi / 2 or abs(el) >= np.pi / 2:
            return 0.0
        n_h = np.log(0.5) / np.log(np.cos(self.horizontal / 2))
        n_v = np.log(0.5) / np.log(np.cos(self.vertical / 2))
        return float(np.cos(az) ** n_h * np.cos(el) ** n_v)


@dataclass(frozen=True, eq=False)
class RawChirp:
    time: float
    tx_pose: Pose
    rx_pose: Pose
    samples: np.ndarray


@dataclass(frozen=True, eq=False)
class RangeProfile:
    """Range-compressed chirp. Bin ``b`` of ``bins`` sits at delay
    ``(start_bin + b) * delay_per_bin``."""

    time: float
    tx_pose: Pose
    rx_pose: Pose
    bins: np.ndarray
    delay_per_bin: float
    start_bin: int = 0

    @property
    def delays(self) -> np.ndarray:
        return (self.start_bin + np.arange(len(self.bins))) * self.delay_per_bin


def chirp_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, chirp index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def synthesize_chirp(
    radar: RadarParams,
    tx: Pose,
    rx: Pose,
    scene: Scene,
    seed: int = 0,
    index: int = 0,
    mode: str = "bistatic",
    pattern: AntennaPattern | None = None,
) -> RawChirp:
    """Dechirped baseband samples of one chirp for the scatterers in ``scene``."""
    tx_p, rx_p = tx.transform.translation, rx.transform.translation
    if not (tx_p[2] > scene.interface_z and rx_p[2] > scene.interface_z):
        raise ValueError("tx and rx must be above the interface")
    n = radar.n_samples
    t = np.arange(n) / radar.fs
    out = np.zeros(n, dtype=np.complex128)
    for sc in scene.scatterers:
        if sc.amplitude == 0 or not sc.visible_from(tx_p):
            continue
        dt = round_trip_time(tx_p, rx_p, sc.position, scene.interface_z, scene.er, mode)
        amp = sc.amplitude
        if pattern is not None:
            amp *= np.sqrt(pattern.gain(tx, sc.position) * pattern.gain(rx, sc.position))
        phase0 = matched_phase(dt, radar.f0, radar.slope)
        out += amp * np.exp(1j * (phase0 + 2 * np.pi * radar.slope * dt * t))
    if scene.noise_std > 0:
        g = chirp_rng(seed, index)
        noise = g.standard_normal(2 * n).view(np.complex128)
        out += noise * (scene.noise_std / np.sqrt(2))
    return RawChirp(tx.time, tx, rx, out)


def hann(n: int) -> np.ndarray:
    # symmetric window; the 16x padded DFT is the interpolator
    return np.hanning(n)


def range_compress(
    chirp: RawChirp,
    pad_factor: int = 16,
    radar: RadarParams | None = None,
    delay_window: tuple[float, float] | None = None,
) -> RangeProfile:
    """Hann window, zero-pad to ``pad_factor * N`` and FFT.

    ``radar`` supplies the slope for the bin-to-delay map (default radar
    otherwise). ``delay_window=(lo, hi)`` keeps only bins covering that
    delay span, which bounds memory when stacking thousands of chirps.
    """
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    radar = radar or RadarParams()
    x = np.asarray(chirp.samples)
    n = len(x)
    spec = np.fft.fft(x * hann(n), pad_factor * n)
    dpb = radar.fs / (pad_factor * n * radar.slope)
    start = 0
    if delay_window is not None:
        lo, hi = delay_window
        start = max(0, int(np.floor(lo / dpb)) - 1)
        stop = min(len(spec), int(np.ceil(hi / dpb)) + 2)
        spec = spec[start:stop].copy()
    return RangeProfile(chirp.time, chirp.tx_pose, chirp.rx_pose, spec, dpb, start)


@njit(cache=True, nogil=True)
def interp_bins(bins, start_bin, delay_per_bin, delay):
    pos = delay / delay_per_bin - start_bin
    if not pos >= 0.0:
        return 0.0j
    i = int(pos)
    n = bins.shape[0]
    if i >= n - 1:
        if i == n - 1 and pos == i:
            return bins[i]
        return 0.0j
    f = pos - i
    return bins[i] * (1.0 - f) + bins[i + 1] * f


def sample_profile(profile: RangeProfile, delay: float) -> complex:
    """Linearly interpolated profile value at ``delay``; zero outside the swath."""
    return complex(interp_bins(profile.bins, profile.start_bin, profile.delay_per_bin, float(delay)))


@dataclass(frozen=True, eq=False)
class ProfileStack:
    """Contiguous ``(n_chirps, n_bins)`` block of equally-binned range profiles."""

    bins: np.ndarray
    delay_per_bin: float
    start_bin: int
    tx: np.ndarray
    rx: np.ndarray
    times: np.ndarray
    aperture_ids: tuple = ()

    def __len__(self):
        return self.bins.shape[0]

    @classmethod
    def from_profiles(cls, profiles: Sequence[RangeProfile], aperture_ids=()) -> "ProfileStack":
        profiles = list(profiles)
        if not profiles:
            raise ValueError("no range profiles given")
        dpb = profiles[0].delay_per_bin
        start = min(p.start_bin for p in profiles)
        stop = max(p.start_bin + len(p.bins) for p in profiles)
        bins = np.zeros((len(profiles), stop - start), dtype=np.complex128)
        for i, p in enumerate(profiles):
            if p.delay_per_bin != dpb:
                raise ValueError("profiles have different bin spacing")
            bins[i, p.start_bin - start : p.start_bin - start + len(p.bins)] = p.bins
        return cls(
            bins,
            dpb,
            start,
            np.array([p.tx_pose.transform.translation for p in profiles]),
            np.array([p.rx_pose.transform.translation for p in profiles]),
            np.array([p.time for p in profiles]),
            tuple(aperture_ids),
        )

    def subset(self, idx) -> "ProfileStack":
        return ProfileStack(
            self.bins[idx], self.delay_per_bin, self.start_bin,
            self.tx[idx], self.rx[idx], self.times[idx], self.aperture_ids,
        )


def simulate_pass(
    radar: RadarParams,
    tx_track: Sequence[Pose],
    rx_track: Sequence[Pose],
    scene: Scene,
    seed: int = 0,
    mode: str = "bistatic",
    pattern: AntennaPattern | None = None,
) -> list[RawChirp]:
    """Synthesize one chirp per pose pair; chirp ``i`` uses noise stream ``(seed, i)``."""
    return [
        synthesize_chirp(radar, tx, rx, scene, seed, i, mode, pattern)
        for i, (tx, rx) in enumerate(zip(tx_track, rx_track))
    ]


def compress_pass(
    chirps: Sequence[RawChirp],
    radar: RadarParams,
    pad_factor: int = 16,
    delay_window: tuple[float, float] | None = None,
    aperture_ids=(),
) -> ProfileStack:
    return ProfileStack.from_profiles(
        [range_compress(c, pad_factor, radar, delay_window) for c in chirps], aperture_ids
    )


def delay_window_for(tx: np.ndarray, rx: np.ndarray, xy_box, z_range, interface_z: float, er: float,
                     margin: float = 1e-9) -> tuple[float, float]:
    """Delay span guaranteed to contain every pixel of a focusing box.

    Lower bound: straight-line distance to the nearest box point at ``c0``
    (refraction only adds delay). Upper bound: air path to the interface
    point above the pixel plus a vertical soil leg, which can only exceed
    the Fermat minimum.
    """
    (x0, x1), (y0, y1) = xy_box
    z_lo, z_hi = min(z_range), max(z_range)
    c1 = wave_speed(er)

    def bounds(a):
        nx = np.clip(a[:, 0], x0, x1)
        ny = np.clip(a[:, 1], y0, y1)
        nz = np.clip(a[:, 2], z_lo, z_hi)
        near = np.sqrt((a[:, 0] - nx) ** 2 + (a[:, 1] - ny) ** 2 + (a[:, 2] - nz) ** 2) / C0
        far = np.zeros(len(a))
        for cx in (x0, x1):
            for cy in (y0, y1):
                h2 = (a[:, 0] - cx) ** 2 + (a[:, 1] - cy) ** 2
                for cz in (z_lo, z_hi):
                    if cz >= interface_z:
                        t = np.sqrt(h2 + (a[:, 2] - cz) ** 2) / C0
                    else:
                        t = np.sqrt(h2 + (a[:, 2] - interface_z) ** 2) / C0 + (interface_z - cz) / c1
                    far = np.maximum(far, t)
        return near, far

    n_tx, f_tx = bounds(np.atleast_2d(tx))
    n_rx, f_rx = bounds(np.atleast_2d(rx))
    return max(0.0, float(np.min(n_tx + n_rx)) - margin), float(np.max(f_tx + f_rx)) + margin
