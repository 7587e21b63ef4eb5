"""Scenario-driven command line front end.

Stages read and write files in one output directory, so ``all`` is the
same as running ``simulate estimate focus profile hist detect psf`` in
sequence. Every run ends by rewriting ``manifest.json``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as gio
from .analysis import BoxRegion, amplitude_histogram, depth_profile, estimate_depth
from .detection import detect_volume, group_detections, label_detections, score_detections
from .geometry import antenna_track, circular_trajectory, incidence_angle, predicted_resolution
from .imaging import PeakError, coherent_sum, focus_volume, psf_metrics
from .motion import (
    ImuSample, PrismMeasurement, circle_truth, estimate_trajectory, read_trajectory_csv,
    simulate_heading, simulate_sensors, write_trajectory_csv,
)
from .scenario import Scenario, ScenarioError, bundled_scenario_text, emit, load_scenario, parse_scenario
from .signal import compress_pass, delay_window_for, synthesize_chirp

log = logging.getLogger("gpsar")

STAGES = ("simulate", "estimate", "focus", "profile", "hist", "detect", "psf")
VOLUME = "volume.gpsarvol"


class MissingInput(RuntimeError):
    pass


@dataclass(frozen=True)
class Options:
    workers: int = 1
    truth_trajectory: bool = False


def _derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1, np.uint64)[0])


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingInput(f"missing input {path.name}: {hint}")
    return path


def _raw_name(k):
    return f"raw_{k}.gpsarraw"


# --- stages ----------------------------------------------------------------------


def stage_simulate(sc: Scenario, out: Path, opt: Options) -> None:
    scene = sc.scene.build()
    pattern = sc.antenna.build()
    m = sc.motion
    t_ba1, t_ba2, t_bp = m.t_ba1.transform(), m.t_ba2.transform(), m.t_bp.transform()
    imu_spec, prism_spec, heading_std = m.sensor_specs()
    stride = sc.processing.chirp_stride
    headings = []
    for k, circ in enumerate(sc.circles()):
        body = circular_trajectory(circ)
        idx = np.arange(0, len(body), stride)
        body = [body[i] for i in idx]
        tx, rx = antenna_track(body, t_ba1), antenna_track(body, t_ba2)
        radar_seed = _derived_seed(sc.seed, k, 1)
        chirps = [synthesize_chirp(sc.radar, a, b, scene, radar_seed, int(i), sc.processing.mode, pattern)
                  for a, b, i in zip(tx, rx, idx)]
        gio.write_recording(out / _raw_name(k), sc.radar, chirps)
        write_trajectory_csv(out / f"truth_{k}.csv", body)

        truth = circle_truth(circ, rate=imu_spec.rate, duration=circ.duration + 0.5)
        sensor_seed = _derived_seed(sc.seed, k, 2)
        imu, prism = simulate_sensors(truth, imu_spec, prism_spec, t_bp, sensor_seed)
        headings.append((k, simulate_heading(truth, heading_std, sensor_seed)))
        np.savetxt(out / f"imu_{k}.csv",
                   [(s.time, *s.angular_rate, *s.linear_acceleration) for s in imu],
                   delimiter=",", fmt="%.17g", header="t,wx,wy,wz,ax,ay,az", comments="")
        np.savetxt(out / f"prism_{k}.csv", [(p.time, *p.position) for p in prism],
                   delimiter=",", fmt="%.17g", header="t,x,y,z", comments="")
        log.info("aperture %d: %d chirps, %d IMU samples, %d prism fixes", k, len(chirps), len(imu), len(prism))
    np.savetxt(out / "heading.csv", headings, delimiter=",", fmt=["%d", "%.17g"],
               header="aperture,heading_rad", comments="")


def _radar_times(sc: Scenario, k: int) -> np.ndarray:
    circ = sc.circles()[k]
    return np.arange(0, circ.n_samples, sc.processing.chirp_stride) / circ.prf


def stage_estimate(sc: Scenario, out: Path, opt: Options) -> None:
    hint = "run 'simulate' first"
    heading_path = _require(out / "heading.csv", hint)
    headings = dict(np.loadtxt(heading_path, delimiter=",", skiprows=1, ndmin=2).tolist())
    t_bp = sc.motion.t_bp.transform()
    config = sc.motion.filter_config()
    rows = []
    for k in range(len(sc.apertures)):
        imu_a = np.loadtxt(_require(out / f"imu_{k}.csv", hint), delimiter=",", skiprows=1, ndmin=2)
        pr_a = np.loadtxt(_require(out / f"prism_{k}.csv", hint), delimiter=",", skiprows=1, ndmin=2)
        if k not in headings:
            raise MissingInput(f"heading.csv has no entry for aperture {k}: {hint}")
        imu = [ImuSample(r[0], r[1:4], r[4:7]) for r in imu_a]
        prism = [PrismMeasurement(r[0], r[1:4]) for r in pr_a]
        res = estimate_trajectory(imu, prism, headings[k], t_bp, _radar_times(sc, k), config)
        write_trajectory_csv(out / f"trajectory_{k}.csv", res.poses)
        truth_path = out / f"truth_{k}.csv"
        if truth_path.exists():
            truth = np.array([p.position for p in read_trajectory_csv(truth_path)])
            est = np.array([p.position for p in res.poses])
            err = np.linalg.norm(est - truth, axis=1)
            rows.append((k, float(np.sqrt(np.mean(err**2))), float(err.max())))
            log.info("aperture %d: fused RMSE %.2f mm", k, rows[-1][1] * 1e3)
    if rows:
        gio.write_csv(out / "estimate_report.csv", ["aperture", "rmse_m", "max_error_m"],
                       [(k, f"{r:.6e}", f"{e:.6e}") for k, r, e in rows])


def _antenna_poses(sc: Scenario, out: Path, k: int, chirps, opt: Options):
    if opt.truth_trajectory:
        return [c.tx_pose for c in chirps], [c.rx_pose for c in chirps]
    path = _require(out / f"trajectory_{k}.csv", "run 'estimate' first or pass --truth-trajectory")
    body = read_trajectory_csv(path)
    t_rec = np.array([c.time for c in chirps])
    t_est = np.array([p.time for p in body])
    if len(t_est) != len(t_rec) or not np.allclose(t_est, t_rec, atol=1e-9):
        raise MissingInput(f"{path.name} does not match the chirp timestamps of {_raw_name(k)}")
    m = sc.motion
    return antenna_track(body, m.t_ba1.transform()), antenna_track(body, m.t_ba2.transform())


def stage_focus(sc: Scenario, out: Path, opt: Options) -> None:
    grid = sc.grid.build()
    er = sc.focus_er
    zi = sc.scene.interface_z
    volumes = []
    for k in range(len(sc.apertures)):
        radar, chirps = gio.read_recording(_require(out / _raw_name(k), "run 'simulate' first"))
        tx, rx = _antenna_poses(sc, out, k, chirps, opt)
        chirps = [replace(c, tx_pose=a, rx_pose=b) for c, a, b in zip(chirps, tx, rx)]
        tx_p = np.array([p.position for p in tx])
        rx_p = np.array([p.position for p in rx])
        window = delay_window_for(tx_p, rx_p, grid.xy_box, (grid.z_bottom, grid.z_top), zi, er)
        stack = compress_pass(chirps, radar, sc.processing.pad_factor, window, (k,))
        t0 = time.perf_counter()
        volumes.append(focus_volume(stack, grid, zi, er, radar, opt.workers, sc.processing.mode, (k,)))
        log.info("aperture %d focused (%d chirps, %d bins) in %.1f s", k, len(stack), stack.bins.shape[1],
                 time.perf_counter() - t0)
    vol = coherent_sum(volumes)
    gio.write_volume(out / VOLUME, vol)
    planes = out / "planes"
    planes.mkdir(exist_ok=True)
    db = vol.magnitude_db(sc.processing.clip_db)
    for z, p in zip(vol.z, db):
        gio.write_pgm(planes / f"z{round(z * 1e3):+04d}mm.pgm", p, sc.processing.clip_db)


def _load_volume(sc: Scenario, out: Path):
    return gio.read_volume(_require(out / VOLUME, "run 'focus' first"), sc.scene.interface_z)


def _target_box(sc: Scenario, t) -> BoxRegion:
    return BoxRegion((t.position[0], t.position[1]), sc.analysis.box_half_extent)


def _boxed_targets(sc: Scenario, grid):
    for t in sc.scene.targets:
        box = _target_box(sc, t)
        try:
            box.index_slices(grid)
        except ValueError:
            log.warning("target %d lies outside the focusing grid; skipped", t.id)
            continue
        yield t, box


def stage_profile(sc: Scenario, out: Path, opt: Options) -> None:
    from .plotting import plot_depth_profiles

    vol = _load_volume(sc, out)
    profiles, rows = {}, []
    for t, box in _boxed_targets(sc, vol.grid):
        prof = depth_profile(vol, box)
        profiles[t.id] = prof
        gio.write_depth_profile_csv(out / f"profile_target_{t.id}.csv", prof)
        z_hat = estimate_depth(prof)
        k = vol.grid.plane_index(z_hat)
        x, y = prof.locations[k]
        rows.append((t.id, x, y, z_hat, prof.amplitude_db[k]))
    gio.write_targets_csv(out / "targets.csv", rows)
    plot_depth_profiles(out / "profile.png", profiles, {t.id: t.position[2] for t in sc.scene.targets})


def stage_hist(sc: Scenario, out: Path, opt: Options) -> None:
    from .plotting import plot_histograms

    vol = _load_volume(sc, out)
    a = sc.analysis
    hists = {}
    for z_mm in a.hist_planes_mm:
        z = z_mm * 1e-3
        if not vol.grid.z_bottom - 1e-9 <= z <= vol.grid.z_top + 1e-9:
            log.warning("histogram plane %.1f mm is outside the volume; skipped", z_mm)
            continue
        counts, edges = amplitude_histogram(vol.plane(z), a.hist_bins, a.hist_range_db)
        hists[z] = (counts, edges)
        gio.write_histogram_csv(out / f"hist_z{round(z_mm):+04d}mm.csv", counts, edges)
    plot_histograms(out / "hist.png", hists)


def stage_detect(sc: Scenario, out: Path, opt: Options) -> None:
    from .plotting import plot_detections

    vol = _load_volume(sc, out)
    a = sc.analysis
    dets = detect_volume(vol, sc.cfar)
    groups = label_detections(dets, a.group_radius)
    gio.write_detections_csv(out / "detections.csv", dets, groups)
    reports = group_detections(dets, a.group_radius)
    gio.write_targets_csv(out / "detected_targets.csv",
                          [(i + 1, r.x, r.y, r.z, r.amplitude_db) for i, r in enumerate(reports)])
    truth_xy = [t.position[:2] for t in sc.scene.targets]
    score = score_detections(reports, truth_xy, a.score_radius)
    gio.write_csv(out / "score.csv", ["metric", "value"], [
        ("truth_targets", len(truth_xy)), ("reported", len(reports)), ("detected", score.detected),
        ("missed", score.missed), ("false_alarms", score.false_alarms),
    ])
    log.info("detected %d of %d targets, %d false alarms", score.detected, len(truth_xy), score.false_alarms)
    plot_detections(out / "detect.png", vol, reports, truth_xy, sc.processing.clip_db)


def stage_psf(sc: Scenario, out: Path, opt: Options) -> None:
    from .plotting import plot_psf

    vol = _load_volume(sc, out)
    g = vol.grid
    mag = np.abs(vol.data)
    inc = float(np.mean([incidence_angle(ap.height - sc.scene.interface_z, ap.radius) for ap in sc.apertures]))
    rows, best = [], None
    nan = float("nan")
    for t, box in _boxed_targets(sc, g):
        rs, cs = box.index_slices(g)
        sub = mag[:, rs, cs]
        k, iy, ix = np.unravel_index(int(np.argmax(sub)), sub.shape)
        hint = (k, iy + rs.start, ix + cs.start)
        medium = "soil" if t.position[2] < sc.scene.interface_z else "air"
        p_cr, _, p_z = predicted_resolution(sc.radar, inc, vol.er, medium)
        try:
            m = psf_metrics(vol, hint)
            meas = (m.cross_range, m.ground_range, m.z, m.pslr_db)
            if best is None or m.peak_amplitude > best.peak_amplitude:
                best = m
        except PeakError as exc:
            log.warning("target %d: %s", t.id, exc)
            meas = (nan, nan, nan, nan)
        rows.append((t.id, t.position[2] * 1e3, *(v * 1e2 for v in meas[:3]), p_cr * 1e2, p_z * 1e2, meas[3]))
    gio.write_csv(out / "psf.csv", ["id", "z_mm", "cross_range_cm", "ground_range_cm", "z_width_cm",
                                     "predicted_cross_range_cm", "predicted_z_cm", "pslr_db"],
                   [(r[0], f"{r[1]:.1f}", *(f"{v:.3f}" for v in r[2:])) for r in rows])
    if best is not None:
        plot_psf(out / "psf.png", vol, best)


_STAGE_FUNCS = {
    "simulate": stage_simulate, "estimate": stage_estimate, "focus": stage_focus,
    "profile": stage_profile, "hist": stage_hist, "detect": stage_detect, "psf": stage_psf,
}


# --- manifest ----------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(sc: Scenario, out: Path, opt: Options) -> dict:
    """Seed, version, parameter hash and a hash of every artifact in ``out``.

    Worker count is left out because it never changes the outputs.
    """
    params = emit(sc) + f"truth_trajectory: {opt.truth_trajectory}\n"
    outputs = {
        str(p.relative_to(out)): _sha256(p)
        for p in sorted(out.rglob("*")) if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "manifest_version": 1,
        "package_version": __version__,
        "seed": sc.seed,
        "parameter_hash": hashlib.sha256(params.encode()).hexdigest(),
        "truth_trajectory": opt.truth_trajectory,
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def run(command: str, scenario: Scenario, out_dir, options: Options = Options()) -> int:
    """Run one stage (or ``all``) and write the manifest; returns an exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.yaml").write_text(emit(scenario))
    stages = STAGES if command == "all" else (command,)
    try:
        for st in stages:
            t0 = time.perf_counter()
            _STAGE_FUNCS[st](scenario, out, options)
            log.info("%s done in %.1f s", st, time.perf_counter() - t0)
    except MissingInput as exc:
        print(f"gpsar {command}: {exc}", file=sys.stderr)
        write_manifest(scenario, out, options)
        return 3
    write_manifest(scenario, out, options)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpsar", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=(*STAGES, "all"))
    p.add_argument("--scenario", help="scenario YAML (default: bundled six-circle field protocol)")
    p.add_argument("--out", default="gpsar_out", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, help="override the scenario seed (unsigned 64-bit)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="imaging threads")
    p.add_argument("--pad-factor", type=int, help="range zero-padding factor (scenario default 16)")
    p.add_argument("--er", type=float, help="relative permittivity used for focusing")
    p.add_argument("--truth-trajectory", action="store_true",
                   help="focus with the simulated true antenna poses instead of the fused estimate")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def apply_overrides(sc: Scenario, args) -> Scenario:
    proc = sc.processing
    if args.pad_factor is not None:
        if args.pad_factor < 1:
            raise ScenarioError("--pad-factor: must be >= 1")
        proc = replace(proc, pad_factor=args.pad_factor)
    if args.er is not None:
        if not args.er >= 1.0:
            raise ScenarioError("--er: must be >= 1")
        proc = replace(proc, er=float(args.er))
    seed = sc.seed
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ScenarioError("--seed: must be an unsigned 64-bit integer")
        seed = args.seed
    return replace(sc, processing=proc, seed=seed)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("gpsar: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        sc = load_scenario(args.scenario) if args.scenario else parse_scenario(bundled_scenario_text())
        sc = apply_overrides(sc, args)
    except (OSError, ScenarioError) as exc:
        print(f"gpsar: {exc}", file=sys.stderr)
        return 2
    return run(args.command, sc, args.out, Options(args.workers, args.truth_trajectory))


if __name__ == "__main__":
    sys.exit(main())
