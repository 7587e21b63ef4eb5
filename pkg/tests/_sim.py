"""Shared simulation helpers for the test suite."""

import numpy as np

from gpsar.geometry import CircleSpec, Transform, antenna_track, circular_trajectory
from gpsar.signal import RadarParams, Scatterer, Scene, compress_pass, delay_window_for, synthesize_chirp

RADAR = RadarParams()
SURVEY_CIRCLE = CircleSpec(radius=7.75, height=3.75, speed=0.4, prf=30.0)
TX_MOUNT = Transform(translation=(0.2, 0.0, 0.0))
RX_MOUNT = Transform(translation=(-0.2, 0.0, 0.0))


def scene_with(*positions, er=8.0, noise_std=0.0, amplitude=1.0, visibility=None):
    return Scene(0.0, er, tuple(Scatterer(np.array(p, float), amplitude, visibility) for p in positions), noise_std)


def body_track(circle=SURVEY_CIRCLE, stride=1):
    return circular_trajectory(circle)[::stride]


def profiles_for(scene, grid, body, radar=RADAR, pad=16, seed=0, mode="bistatic", er_window=None,
                 tx_mount=TX_MOUNT, rx_mount=RX_MOUNT):
    """Simulated, range-compressed and delay-cropped stack for ``body`` poses."""
    tx, rx = antenna_track(body, tx_mount), antenna_track(body, rx_mount)
    chirps = [synthesize_chirp(radar, a, b, scene, seed, i, mode) for i, (a, b) in enumerate(zip(tx, rx))]
    tx_p = np.array([p.position for p in tx])
    rx_p = np.array([p.position for p in rx])
    # focusing with a larger permittivity needs a longer window
    er = scene.er if er_window is None else er_window
    window = delay_window_for(tx_p, rx_p, grid.xy_box, (grid.z_bottom, grid.z_top), scene.interface_z, er)
    return compress_pass(chirps, radar, pad, window)


def fusion_run(seed, duration=60.0, noise=True, circle=SURVEY_CIRCLE, t_bp=None, dead_reckoning=False):
    """One simulated flight through the fusion pipeline.

    Returns a dict of position RMSEs (m) for the smoothed and filtered
    estimates at the midpoints between prism fixes, the prism-interpolation
    baseline at the same instants, the worst smoothed errors (m, rad) and,
    if requested, the IMU-only dead-reckoning RMSE after 10 s.
    """
    from gpsar.geometry import quat_to_matrix
    from gpsar.motion import (
        ImuSpec, PrismSpec, circle_truth, dead_reckon, estimate_trajectory, initialize_from_sensors,
        interpolate_prism, simulate_heading, simulate_sensors, truth_at,
    )

    t_bp = Transform(translation=(0.0, 0.0, 0.2)) if t_bp is None else t_bp
    truth = circle_truth(circle, 200.0, duration)
    imu_spec, prism_spec = (ImuSpec(), PrismSpec()) if noise else (ImuSpec.noise_free(), PrismSpec.noise_free())
    imu, prism = simulate_sensors(truth, imu_spec, prism_spec, t_bp, seed)
    heading = simulate_heading(truth, np.deg2rad(2.0) if noise else 0.0, seed)
    fix_t = np.array([m.time for m in prism])
    mid = 0.5 * (fix_t[1:] + fix_t[:-1])
    mid = mid[mid > fix_t[0] + 1.0]
    res = estimate_trajectory(imu, prism, heading, t_bp, mid)
    true_p = truth_at(truth, mid)

    def body_at(times, xs):
        return np.stack([np.interp(mid, times, xs[:, i]) for i in range(3)], axis=-1)

    fused = np.array([p.position for p in res.poses])
    filt = body_at(res.history.times, res.history.x_filt[:, :3])
    # prism baseline mapped to the body origin with the true attitude
    k = np.rint((mid - truth.times[0]) * 200.0).astype(int)  # nearest truth sample
    lever = np.array([quat_to_matrix(truth.quats[i]) @ t_bp.translation for i in k])
    prism_body = interpolate_prism(prism, mid) - lever

    def rmse(a):
        return float(np.sqrt(np.mean(np.sum((a - true_p) ** 2, axis=1))))

    ang = []
    for p, i in zip(res.poses, k):
        r = quat_to_matrix(truth.quats[i]).T @ p.transform.rotation_matrix
        ang.append(np.arccos(np.clip((np.trace(r) - 1) / 2, -1, 1)))
    out = {
        "smoothed": rmse(fused),
        "filtered": rmse(filt),
        "prism": rmse(prism_body),
        "max_pos": float(np.max(np.linalg.norm(fused - true_p, axis=1))),
        "max_ang": float(np.max(ang)),
    }
    if dead_reckoning:
        state = initialize_from_sensors(imu, prism, heading, t_bp)
        dr = dead_reckon(state, imu)
        sel = dr.times >= 10.0
        tp = truth_at(truth, dr.times[sel])
        out["dead_reckoning"] = float(np.sqrt(np.mean(np.sum((dr.x_filt[sel, :3] - tp) ** 2, axis=1))))
        fs = res.history.times >= 10.0
        tf = truth_at(truth, res.history.times[fs])
        sm = res.smoothed.x[fs, :3]
        out["smoothed_after_10s"] = float(np.sqrt(np.mean(np.sum((sm - tf) ** 2, axis=1))))
    return out
