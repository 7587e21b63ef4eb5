"""Acceptance criteria. Each test records one PASS/FAIL line, printed in the
pytest terminal summary under "acceptance criteria"."""

import time
from dataclasses import replace

import numpy as np
import pytest

from _oracles import scan_min_time
from _sim import RADAR, RX_MOUNT, SURVEY_CIRCLE, TX_MOUNT, body_track, fusion_run, profiles_for, scene_with
from conftest import ACCEPTANCE_LINES
from gpsar.analysis import BoxRegion, depth_profile, estimate_depth
from gpsar.detection import ca_cfar_plane
from gpsar.geometry import CircleSpec, antenna_track, incidence_angle, predicted_resolution
from gpsar.imaging import GridSpec, coherent_sum, focus_volume, half_power_width, psf_metrics
from gpsar.motion import (
    ImuSpec, PrismSpec, circle_truth, estimate_trajectory, simulate_heading, simulate_sensors,
)
from gpsar.propagation import refraction_point, wave_speed
from gpsar.signal import RawChirp, range_compress
from gpsar.geometry import Pose, Transform

pytestmark = pytest.mark.slow

INCIDENCE = incidence_angle(SURVEY_CIRCLE.height, SURVEY_CIRCLE.radius)


def record(n, ok, detail):
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def center_target():
    """Full-circle pass over an isotropic surface scatterer at the scene centre,
    cropped to the 128 x 128 grid at 5 mm."""
    grid = GridSpec.centered(0, 0, 0.3175, 0.3175, 0.005, 0.0, 0.0)
    assert (grid.nx, grid.ny) == (128, 128)
    scene = scene_with((0.0, 0.0, 0.0))
    body = body_track()
    t0 = time.perf_counter()
    stack = profiles_for(scene, grid, body)
    t_sim = time.perf_counter() - t0
    return {"grid": grid, "scene": scene, "body": body, "stack": stack, "t_sim": t_sim, "results": {}}


def test_criterion_01_cross_range_resolution(center_target):
    grid, stack = center_target["grid"], center_target["stack"]
    t0 = time.perf_counter()
    vol = focus_volume(stack, grid, workers=8)
    t_focus = time.perf_counter() - t0
    center_target["results"][8] = (vol.data, t_focus)
    m = psf_metrics(vol, (0, *grid.pixel_of(0.0, 0.0)))
    pred = predicted_resolution(RADAR, INCIDENCE)[0]
    runtime = center_target["t_sim"] + t_focus
    ok = abs(m.cross_range / pred - 1) <= 0.25 and 0.02 <= m.cross_range <= 0.04 and runtime < 300
    record(1, ok, f"cross-range {m.cross_range * 100:.2f} cm vs predicted {pred * 100:.2f} cm "
                  f"({(m.cross_range / pred - 1) * 100:+.1f}%, bracket 2-4 cm); ground-range "
                  f"{m.ground_range * 100:.2f} cm; runtime {runtime:.1f} s (limit 300 s, 8 workers)")


def test_criterion_02_depth_resolution_in_soil():
    grid = GridSpec.centered(0, 0, 0.02, 0.02, 0.005, -0.002, -0.1, 0.002)
    scene = scene_with((0.0, 0.0, -0.05))
    vol = focus_volume(profiles_for(scene, grid, body_track()), grid, workers=8)
    m = psf_metrics(vol, (grid.plane_index(-0.05), 4, 4))
    pred = predicted_resolution(RADAR, INCIDENCE, er=8.0, medium="soil")[2]
    ok = abs(m.z / pred - 1) <= 0.30
    record(2, ok, f"z width {m.z * 100:.2f} cm vs predicted {pred * 100:.2f} cm ({(m.z / pred - 1) * 100:+.1f}%, "
                  f"tolerance 30%)")


def test_criterion_03_depth_estimation():
    targets = {-0.05: (-0.15, 0.05), -0.14: (0.15, -0.05)}
    scene = scene_with(*[(x, y, z) for z, (x, y) in targets.items()])
    window_grid = GridSpec.centered(0, 0, 0.2, 0.1, 0.05, 0.1, -0.2, 0.005)
    stack = profiles_for(scene, window_grid, body_track())
    parts, ok = [], True
    for z, (x, y) in targets.items():
        grid = GridSpec.centered(x, y, 0.02, 0.02, 0.005, 0.1, -0.2, 0.005)
        assert grid.n_planes == 61
        prof = depth_profile(focus_volume(stack, grid, workers=8), BoxRegion((x, y), (0.02, 0.02)))
        z_hat = estimate_depth(prof)
        good = abs(z_hat - z) <= 0.010 and prof.span_db >= 6.0
        ok &= good
        parts.append(f"truth {z * 1e3:.0f} mm -> {z_hat * 1e3:.0f} mm, span {prof.span_db:.1f} dB")
    record(3, ok, "; ".join(parts) + " (limits 10 mm, 6 dB)")


def test_criterion_04_refraction_solver():
    g = np.random.default_rng(4)
    n = 10_000
    ant = np.column_stack([g.uniform(-10, 10, n), g.uniform(-10, 10, n), g.uniform(0.5, 6.0, n)])
    pix = np.column_stack([g.uniform(-1, 1, n), g.uniform(-1, 1, n), -g.uniform(1e-3, 0.5, n)])
    er = g.uniform(1.5, 30, n)
    t0 = time.perf_counter()
    sols = [refraction_point(a, p, 0.0, e) for a, p, e in zip(ant, pix, er)]
    runtime = time.perf_counter() - t0
    resid = max(s.snell_residual for s in sols)
    dist = np.hypot(ant[:, 0] - pix[:, 0], ant[:, 1] - pix[:, 1])
    oracle = np.array([scan_min_time(ant[i, 2], -pix[i, 2], dist[i], wave_speed(er[i]), 1_000_000)
                       for i in range(n)])
    err = np.abs(np.array([s.delay_one_way for s in sols]) - oracle).max()
    ok = resid < 1e-12 and err < 1e-12 and runtime < 30
    record(4, ok, f"max Snell residual {resid:.1e} (limit 1e-12), max |t - oracle| {err:.1e} s (limit 1e-12 s), "
                  f"solver runtime {runtime:.2f} s for 1e4 geometries (limit 30 s)")


def test_criterion_05_range_compression():
    dt = 33.356e-9
    t = np.arange(RADAR.n_samples) / RADAR.fs
    phase = 2 * np.pi * RADAR.f0 * dt - np.pi * RADAR.slope * dt**2
    x = np.exp(1j * (phase + 2 * np.pi * RADAR.slope * dt * t))
    pose = Pose(0.0, Transform())
    prof = range_compress(RawChirp(0.0, pose, pose, x), 16, RADAR)
    peak = prof.delays[np.argmax(np.abs(prof.bins))]
    half = prof.delay_per_bin / 2
    width = half_power_width(np.abs(prof.bins), 1 / 16)
    ok = abs(peak - dt) < half and abs(width / 1.44 - 1) <= 0.10
    record(5, ok, f"peak delay error {abs(peak - dt) * 1e12:.2f} ps (limit {half * 1e12:.2f} ps); "
                  f"Hann -3 dB width {width:.3f} bins (1.44 +/- 10%)")


def test_criterion_06_cfar_calibration():
    g = np.random.default_rng(6)
    p = g.exponential(size=(1000, 1000))
    mask = ca_cfar_plane(p)
    rate = mask.mean()
    invariant = all(np.array_equal(ca_cfar_plane(s * p), mask) for s in (0.1, 10.0))
    ok = 0.5e-4 <= rate <= 2e-4 and invariant
    record(6, ok, f"false-alarm rate {rate:.2e} on 1e6 cells (window [5e-5, 2e-4]); "
                  f"mask unchanged under x0.1 and x10: {invariant}")


def test_criterion_07_fusion_quality():
    runs = [fusion_run(seed, 60.0, dead_reckoning=True) for seed in range(100)]
    med = {k: float(np.median([r[k] for r in runs])) for k in ("smoothed", "prism", "dead_reckoning",
                                                              "smoothed_after_10s")}
    smooth_wins = sum(r["smoothed"] <= r["filtered"] for r in runs)
    clean = fusion_run(0, 60.0, noise=False)
    ok = (med["smoothed"] < med["prism"] and med["smoothed_after_10s"] < med["dead_reckoning"]
          and clean["max_pos"] < 1e-4 and clean["max_ang"] < 1e-4)
    record(7, ok, f"median fused RMSE {med['smoothed'] * 1e3:.2f} mm vs prism interpolation "
                  f"{med['prism'] * 1e3:.2f} mm; after 10 s {med['smoothed_after_10s'] * 1e3:.2f} mm vs dead "
                  f"reckoning {med['dead_reckoning']:.2f} m; smoothed <= filtered in {smooth_wins}/100 runs; "
                  f"noise-free max error {clean['max_pos']:.1e} m, {clean['max_ang']:.1e} rad")


def test_criterion_08_fused_trajectory_peak_loss(center_target):
    body, stack = center_target["body"], center_target["stack"]
    grid = GridSpec.centered(0, 0, 0.05, 0.05, 0.005, 0.0, 0.0)
    truth_peak = np.abs(focus_volume(stack, grid, workers=8).data).max()
    t_radar = np.array([p.time for p in body])
    t_bp = Transform(translation=(0.0, 0.0, 0.2))
    losses = []
    for seed in range(3):
        truth = circle_truth(SURVEY_CIRCLE, 200.0, SURVEY_CIRCLE.duration + 0.5)
        imu, prism = simulate_sensors(truth, ImuSpec(), PrismSpec(), t_bp, seed)
        heading = simulate_heading(truth, np.deg2rad(2.0), seed)
        fused = estimate_trajectory(imu, prism, heading, t_bp, t_radar).poses
        tx = np.array([p.position for p in antenna_track(fused, TX_MOUNT)])
        rx = np.array([p.position for p in antenna_track(fused, RX_MOUNT)])
        peak = np.abs(focus_volume(replace(stack, tx=tx, rx=rx), grid, workers=8).data).max()
        losses.append(20 * np.log10(truth_peak / peak))
    worst = max(losses)
    record(8, worst < 3.0, f"peak loss with fused trajectory {', '.join(f'{l:.2f}' for l in losses)} dB "
                           f"over 3 noise seeds (limit 3 dB)")


def test_criterion_09_coherent_superposition():
    g = np.random.default_rng(9)
    grid = GridSpec.centered(0, 0, 0.02, 0.02, 0.005, 0.0, -0.02, 0.005)
    data = g.normal(size=(5, 9, 9)) + 1j * g.normal(size=(5, 9, 9))
    from gpsar.imaging import ImageVolume
    v = ImageVolume(grid, data, 8.0)
    exact = np.array_equal(coherent_sum([v] * 6).data, 6 * data)

    scene = scene_with((0.0, 0.0, 0.0), er=1.0)
    grid = GridSpec.centered(0, 0, 0.03, 0.03, 0.005, 0.4, -0.4, 0.005)
    vols = [focus_volume(profiles_for(scene, grid, body_track(CircleSpec(radius=7.75, height=h), stride=2)),
                         grid, er=1.0, workers=8) for h in (2.5, 5.0)]
    centre = (grid.plane_index(0.0), 6, 6)
    widths = [psf_metrics(v, centre).z for v in vols]
    both = psf_metrics(coherent_sum(vols), centre).z
    ok = exact and both < min(widths)
    record(9, ok, f"six-copy sum exact: {exact}; z width 2.5 m {widths[0] * 100:.1f} cm, 5.0 m "
                  f"{widths[1] * 100:.1f} cm, summed {both * 100:.1f} cm")


def test_criterion_10_determinism_and_scaling(center_target):
    grid, stack = center_target["grid"], center_target["stack"]
    if 8 not in center_target["results"]:
        t0 = time.perf_counter()
        center_target["results"][8] = (focus_volume(stack, grid, workers=8).data, time.perf_counter() - t0)
    data8, t8 = center_target["results"][8]
    t0 = time.perf_counter()
    data1 = focus_volume(stack, grid, workers=1).data
    t1 = time.perf_counter() - t0
    identical = np.array_equal(data1, data8)
    speedup = t1 / t8
    import os
    cpus = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    record(10, identical and speedup >= 4.0,
           f"1- and 8-worker volumes bit-identical: {identical}; speedup {speedup:.2f}x "
           f"(1 worker {t1:.1f} s, 8 workers {t8:.1f} s, limit 4x; {cpus} CPU(s) available)")
