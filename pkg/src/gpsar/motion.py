"""Total-station + IMU fusion for antenna phase-center trajectories.

Pipeline: a 15-state error-state EKF (position, velocity, attitude, gyro
bias, accel bias) integrates 200 Hz IMU data and is corrected by 20 Hz
prism fixes; a Rauch-Tung-Striebel pass over the stored filter history
smooths the whole run; finally each radar timestamp is reached by
integrating the IMU forward from the preceding smoothed node.

Attitude errors are local (body-frame) rotation vectors:
``q_true = q_est * exp(dtheta)``. Velocity and position are in the world
frame with z up; gravity is ``[0, 0, -9.80665]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .geometry import (
    CircleSpec,
    Pose,
    Transform,
    antenna_track,
    circle_state,
    quat_from_axis_angle,
    quat_from_euler,
    quat_to_matrix,
)

GRAVITY = 9.80665
_G = np.array([0.0, 0.0, -GRAVITY])

# nominal sensor noise figures
ARW_DEG_PER_SQRT_H = 0.66
VRW_MPS_PER_SQRT_H = 0.11
PRISM_RANGE_STD = 4e-3
PRISM_ANGLE_STD = np.deg2rad(0.00056)

# state vector layout: p(0:3) v(3:6) q(6:10) bg(10:13) ba(13:16)


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class ImuSample:
    time: float
    angular_rate: np.ndarray
    linear_acceleration: np.ndarray


@dataclass(frozen=True)
class PrismMeasurement:
    time: float
    position: np.ndarray


@dataclass(frozen=True)
class ImuSpec:
    """IMU error model. Densities are in SI units per sqrt(s)."""

    rate: float = 200.0
    gyro_noise_density: float = np.deg2rad(ARW_DEG_PER_SQRT_H) / 60.0
    accel_noise_density: float = VRW_MPS_PER_SQRT_H / 60.0
    gyro_bias_std: float = 1e-4
    accel_bias_std: float = 2e-3

    @classmethod
    def noise_free(cls, rate: float = 200.0) -> "ImuSpec":
        return cls(rate, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PrismSpec:
    rate: float = 20.0
    range_std: float = PRISM_RANGE_STD
    angle_std: float = PRISM_ANGLE_STD
    station: tuple = (-10.0, 0.0, 1.5)
    time_offset: float = 0.0

    @classmethod
    def noise_free(cls, rate: float = 20.0, station=(-10.0, 0.0, 1.5)) -> "PrismSpec":
        return cls(rate, 0.0, 0.0, station)


@dataclass(frozen=True)
class FilterConfig:
    """Noise levels the estimator assumes (independent of the simulation)."""

    imu: ImuSpec = field(default_factory=ImuSpec)
    prism: PrismSpec = field(default_factory=PrismSpec)
    bias_walk: float = 1e-7
    init_pos_std: float = 0.01
    init_vel_std: float = 0.02
    init_att_std: float = np.deg2rad(0.5)
    init_heading_std: float = np.deg2rad(2.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Densely sampled kinematic truth.

    ``omega_body`` is the body angular rate, ``accel_world`` the kinematic
    acceleration (gravity excluded).
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    quats: np.ndarray
    omega_body: np.ndarray
    accel_world: np.ndarray

    def __len__(self):
        return len(self.times)

    def poses(self) -> list[Pose]:
        return [Pose(float(t), Transform(q, p)) for t, q, p in zip(self.times, self.quats, self.positions)]

    def pose_at(self, i: int) -> Pose:
        return Pose(float(self.times[i]), Transform(self.quats[i], self.positions[i]))


def circle_truth(spec: CircleSpec, rate: float = 200.0, duration: float | None = None) -> Trajectory:
    """Level constant-speed flight on a circle, yaw along the velocity."""
    spec.validate()
    duration = spec.duration if duration is None else duration
    t = np.arange(int(np.floor(duration * rate + 1e-9)) + 1) / rate
    pos, vel, yaw, omega = circle_state(spec, t)
    quats = np.stack([np.cos(yaw / 2), np.zeros_like(yaw), np.zeros_like(yaw), np.sin(yaw / 2)], axis=-1)
    az = spec.start_azimuth + omega * t
    acc = -spec.speed * omega * np.stack([np.cos(az), np.sin(az), np.zeros_like(az)], axis=-1)
    w_body = np.tile([0.0, 0.0, omega], (len(t), 1))
    return Trajectory(t, pos, vel, quats, w_body, acc)


def hover_truth(position, yaw: float, duration: float, rate: float = 200.0) -> Trajectory:
    t = np.arange(int(np.floor(duration * rate + 1e-9)) + 1) / rate
    n = len(t)
    q = quat_from_axis_angle([0, 0, 1], yaw)
    return Trajectory(t, np.tile(np.asarray(position, float), (n, 1)), np.zeros((n, 3)),
                      np.tile(q, (n, 1)), np.zeros((n, 3)), np.zeros((n, 3)))


def _sample_indices(times, start, rate):
    dt = np.diff(times)
    if len(times) < 2 or np.any(dt <= 0):
        raise EstimationError("truth times must be strictly increasing")
    if np.max(dt) > 1.0 / rate + 1e-9:
        raise EstimationError(f"truth sampled slower than the {rate} Hz sensor rate")
    want = start + np.arange(int(np.floor((times[-1] - start) * rate + 1e-9)) + 1) / rate
    idx = np.searchsorted(times, want - 1e-9)
    return np.clip(idx, 0, len(times) - 1)


def simulate_sensors(
    truth: Trajectory,
    imu_spec: ImuSpec = ImuSpec(),
    prism_spec: PrismSpec = PrismSpec(),
    t_bp: Transform = Transform(),
    seed: int = 0,
) -> tuple[list[ImuSample], list[PrismMeasurement]]:
    """IMU and total-station streams from a kinematic truth.

    IMU sample ``k`` holds the rates at its own timestamp and is meant to
    be held constant over the preceding interval.
    """
    rng = np.random.default_rng(seed)
    i_imu = _sample_indices(truth.times, truth.times[0], imu_spec.rate)
    i_prism = _sample_indices(truth.times, truth.times[0], prism_spec.rate)

    bg = rng.normal(0.0, imu_spec.gyro_bias_std, 3) if imu_spec.gyro_bias_std > 0 else np.zeros(3)
    ba = rng.normal(0.0, imu_spec.accel_bias_std, 3) if imu_spec.accel_bias_std > 0 else np.zeros(3)
    sg = imu_spec.gyro_noise_density * np.sqrt(imu_spec.rate)
    sa = imu_spec.accel_noise_density * np.sqrt(imu_spec.rate)
    imu = []
    for k in i_imu:
        r = quat_to_matrix(truth.quats[k])
        f_b = r.T @ (truth.accel_world[k] - _G)
        w = truth.omega_body[k] + bg + (rng.normal(0.0, sg, 3) if sg > 0 else 0.0)
        a = f_b + ba + (rng.normal(0.0, sa, 3) if sa > 0 else 0.0)
        imu.append(ImuSample(float(truth.times[k]), w, a))

    station = np.asarray(prism_spec.station, dtype=float)
    prism = []
    for k in i_prism:
        p = truth.positions[k] + quat_to_matrix(truth.quats[k]) @ t_bp.translation
        d = p - station
        rho = np.linalg.norm(d)
        az = np.arctan2(d[1], d[0])
        el = np.arcsin(d[2] / rho)
        if prism_spec.range_std > 0:
            rho += rng.normal(0.0, prism_spec.range_std)
        if prism_spec.angle_std > 0:
            az += rng.normal(0.0, prism_spec.angle_std)
            el += rng.normal(0.0, prism_spec.angle_std)
        meas = station + rho * np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
        prism.append(PrismMeasurement(float(truth.times[k]) + prism_spec.time_offset, meas))
    return imu, prism


def simulate_heading(truth: Trajectory, std: float, seed: int = 0) -> float:
    """Magnetometer take-off heading: true initial yaw plus Gaussian error."""
    from .geometry import yaw_of

    rng = np.random.default_rng([seed, 7])
    return yaw_of(truth.quats[0]) + (rng.normal(0.0, std) if std > 0 else 0.0)


def prism_covariance(position, spec: PrismSpec) -> np.ndarray:
    """Cartesian covariance of a fix: range error along the line of sight,
    angular error across it."""
    d = np.asarray(position, float) - np.asarray(spec.station, float)
    rho = np.linalg.norm(d)
    u = d / rho
    along = np.outer(u, u)
    return along * spec.range_std**2 + (np.eye(3) - along) * (rho * spec.angle_std) ** 2


# --- numba primitives ----------------------------------------------------------


@njit(cache=True)
def _qmul(a, b):
    return np.array([
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ])


@njit(cache=True)
def _qexp(v):
    ang = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if ang < 1e-12:
        q = np.array([1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]])
    else:
        s = np.sin(0.5 * ang) / ang
        q = np.array([np.cos(0.5 * ang), s * v[0], s * v[1], s * v[2]])
    return q / np.sqrt(np.sum(q * q))


@njit(cache=True)
def _qlog(q):
    if q[0] < 0:
        q = -q
    s = np.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if s < 1e-12:
        return 2.0 * q[1:].copy()
    return 2.0 * np.arctan2(s, q[0]) / s * q[1:]


@njit(cache=True)
def _qconj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


@njit(cache=True)
def _rot(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@njit(cache=True)
def _skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


@njit(cache=True)
def _propagate_nominal(x, wm, am, dt, g):
    w = wm - x[10:13]
    a = am - x[13:16]
    q = x[6:10]
    q_mid = _qmul(q, _qexp(0.5 * dt * w))
    acc = _rot(q_mid) @ a + g
    out = x.copy()
    out[0:3] = x[0:3] + x[3:6] * dt + 0.5 * acc * dt * dt
    out[3:6] = x[3:6] + acc * dt
    qn = _qmul(q, _qexp(dt * w))
    out[6:10] = qn / np.sqrt(np.sum(qn * qn))
    return out


@njit(cache=True)
def _predict(x, P, wm, am, dt, g, q_gyro, q_acc, q_bias):
    """Propagate state and covariance; returns (x, P, F)."""
    w = wm - x[10:13]
    a = am - x[13:16]
    r = _rot(_qmul(x[6:10], _qexp(0.5 * dt * w)))
    F = np.eye(15)
    F[0:3, 3:6] = np.eye(3) * dt
    F[3:6, 6:9] = -r @ _skew(a) * dt
    F[3:6, 12:15] = -r * dt
    F[6:9, 6:9] = _rot(_qexp(-dt * w))
    F[6:9, 9:12] = -np.eye(3) * dt
    Q = np.zeros((15, 15))
    for i in range(3):
        Q[3 + i, 3 + i] = q_acc * dt
        Q[6 + i, 6 + i] = q_gyro * dt
        Q[9 + i, 9 + i] = q_bias * dt
        Q[12 + i, 12 + i] = q_bias * dt
    Pn = F @ P @ F.T + Q
    Pn = 0.5 * (Pn + Pn.T)
    return _propagate_nominal(x, wm, am, dt, g), Pn, F


@njit(cache=True)
def _inject(x, dx):
    out = x.copy()
    out[0:6] = x[0:6] + dx[0:6]
    qn = _qmul(x[6:10], _qexp(dx[6:9]))
    out[6:10] = qn / np.sqrt(np.sum(qn * qn))
    out[10:16] = x[10:16] + dx[9:15]
    return out


@njit(cache=True)
def _difference(xa, xb):
    """Error-state difference ``xa - xb``."""
    d = np.empty(15)
    d[0:6] = xa[0:6] - xb[0:6]
    d[6:9] = _qlog(_qmul(_qconj(xb[6:10]), xa[6:10]))
    d[9:15] = xa[10:16] - xb[10:16]
    return d


@njit(cache=True)
def _update(x, P, z, lever, Rm):
    r = _rot(x[6:10])
    H = np.zeros((3, 15))
    H[0:3, 0:3] = np.eye(3)
    H[0:3, 6:9] = -r @ _skew(lever)
    y = z - (x[0:3] + r @ lever)
    S = H @ P @ H.T + Rm
    K = np.linalg.solve(S, H @ P).T
    IKH = np.eye(15) - K @ H
    Pn = IKH @ P @ IKH.T + K @ Rm @ K.T
    Pn = 0.5 * (Pn + Pn.T)
    return _inject(x, K @ y), Pn


@njit(cache=True)
def _rts(xf, Pf, xp, Pp, F):
    n = xf.shape[0]
    xs = xf.copy()
    Ps = Pf.copy()
    for k in range(n - 2, -1, -1):
        # C = Pf[k] F[k+1]^T Pp[k+1]^-1
        C = np.linalg.solve(Pp[k + 1], F[k + 1] @ Pf[k]).T
        d = _difference(xs[k + 1], xp[k + 1])
        xs[k] = _inject(xf[k], C @ d)
        Pk = Pf[k] + C @ (Ps[k + 1] - Pp[k + 1]) @ C.T
        Ps[k] = 0.5 * (Pk + Pk.T)
    return xs, Ps


# --- public state-machine API ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StateEstimate:
    time: float
    pose: Transform
    velocity: np.ndarray
    gyro_bias: np.ndarray
    accel_bias: np.ndarray
    covariance: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.pose.translation, self.velocity, self.pose.rotation,
                               self.gyro_bias, self.accel_bias])

    @classmethod
    def from_vector(cls, time, x, P) -> "StateEstimate":
        return cls(float(time), Transform(x[6:10], x[0:3]), x[3:6].copy(), x[10:13].copy(),
                   x[13:16].copy(), P)


def initial_state(time, position, velocity, quat, config: FilterConfig = FilterConfig(),
                  gyro_bias=None, accel_bias=None) -> StateEstimate:
    P = np.zeros((15, 15))
    P[0:3, 0:3] = np.eye(3) * config.init_pos_std**2
    P[3:6, 3:6] = np.eye(3) * config.init_vel_std**2
    P[6:8, 6:8] = np.eye(2) * config.init_att_std**2
    P[8, 8] = config.init_heading_std**2
    P[9:12, 9:12] = np.eye(3) * max(config.imu.gyro_bias_std, 1e-6) ** 2
    P[12:15, 12:15] = np.eye(3) * max(config.imu.accel_bias_std, 1e-5) ** 2
    return StateEstimate(
        float(time), Transform(quat, position), np.asarray(velocity, float).copy(),
        np.zeros(3) if gyro_bias is None else np.asarray(gyro_bias, float),
        np.zeros(3) if accel_bias is None else np.asarray(accel_bias, float), P,
    )


def _noise_params(config: FilterConfig):
    return (config.imu.gyro_noise_density**2, config.imu.accel_noise_density**2, config.bias_walk**2)


def ekf_step(state: StateEstimate, imu: ImuSample, config: FilterConfig = FilterConfig()) -> StateEstimate:
    """Strapdown propagation from ``state.time`` to ``imu.time`` holding the sample constant."""
    dt = imu.time - state.time
    if not dt > 0:
        raise EstimationError(f"IMU sample at {imu.time} does not follow state time {state.time}")
    x, P, _ = _predict(state.vector, state.covariance, np.asarray(imu.angular_rate, float),
                       np.asarray(imu.linear_acceleration, float), dt, _G, *_noise_params(config))
    return StateEstimate.from_vector(imu.time, x, P)


def ekf_update(state: StateEstimate, meas: PrismMeasurement, t_bp: Transform,
               config: FilterConfig = FilterConfig(), max_age: float | None = None) -> StateEstimate:
    """Prism position fix with lever-arm model ``p_WP = p_WB + R_WB t_BP``."""
    max_age = 1.0 / config.imu.rate + 1e-9 if max_age is None else max_age
    if abs(meas.time - state.time) > max_age:
        raise EstimationError(f"prism fix at {meas.time} is stale for state at {state.time}")
    Rm = prism_covariance(meas.position, config.prism)
    x, P = _update(state.vector, state.covariance, np.asarray(meas.position, float),
                   t_bp.translation, Rm)
    return StateEstimate.from_vector(state.time, x, P)


@dataclass(frozen=True, eq=False)
class FilterHistory:
    """Per-node filter output kept for smoothing.

    Node ``k`` carries the predicted state/covariance at ``times[k]``, the
    corrected ones, and the transition ``F[k]`` from node ``k-1``.
    """

    times: np.ndarray
    x_pred: np.ndarray
    P_pred: np.ndarray
    x_filt: np.ndarray
    P_filt: np.ndarray
    F: np.ndarray

    def estimates(self, smoothed: "SmoothedHistory | None" = None) -> list[StateEstimate]:
        xs, Ps = (self.x_filt, self.P_filt) if smoothed is None else (smoothed.x, smoothed.P)
        return [StateEstimate.from_vector(t, x, P) for t, x, P in zip(self.times, xs, Ps)]


@dataclass(frozen=True, eq=False)
class SmoothedHistory:
    times: np.ndarray
    x: np.ndarray
    P: np.ndarray


def _merge_events(imu: Sequence[ImuSample], prism: Sequence[PrismMeasurement], t0: float):
    """Time-ordered event list; prism fixes sort after IMU samples at equal times."""
    events = [(s.time, 0, i) for i, s in enumerate(imu) if s.time > t0]
    events += [(m.time, 1, i) for i, m in enumerate(prism) if m.time >= t0]
    events.sort()
    return events


def run_filter(state: StateEstimate, imu: Sequence[ImuSample], prism: Sequence[PrismMeasurement],
               t_bp: Transform, config: FilterConfig = FilterConfig()) -> FilterHistory:
    """EKF over merged streams. A fix between two IMU samples splits the
    interval: the next sample's rates are integrated up to the fix, the fix
    is applied, and integration resumes."""
    imu = sorted(imu, key=lambda s: s.time)
    imu_t = np.array([s.time for s in imu])
    events = _merge_events(imu, prism, state.time)
    noise = _noise_params(config)
    lever = t_bp.translation
    times = [state.time]
    x = state.vector
    P = state.covariance
    xp, Pp, xf, Pf, Fs = [x], [P], [x], [P], [np.eye(15)]
    t = state.time
    for time, kind, i in events:
        if kind == 1:
            m = prism[i]
            if m.time > t:
                j = int(np.searchsorted(imu_t, m.time))
                if j >= len(imu):
                    continue
                nxt = imu[j]
                x, P, F = _predict(x, P, nxt.angular_rate, nxt.linear_acceleration, m.time - t, _G, *noise)
                t = m.time
                times.append(t)
                xp.append(x), Pp.append(P), Fs.append(F)
                xf.append(x), Pf.append(P)
            x, P = _update(x, P, m.position, lever, prism_covariance(m.position, config.prism))
            xf[-1], Pf[-1] = x, P
        else:
            s = imu[i]
            if s.time <= t:
                continue
            x, P, F = _predict(x, P, s.angular_rate, s.linear_acceleration, s.time - t, _G, *noise)
            t = s.time
            times.append(t)
            xp.append(x), Pp.append(P), Fs.append(F)
            xf.append(x), Pf.append(P)
    return FilterHistory(np.array(times), np.array(xp), np.array(Pp), np.array(xf), np.array(Pf),
                         np.array(Fs))


def smooth(history: FilterHistory) -> SmoothedHistory:
    """Fixed-interval RTS pass over the filter history."""
    xs, Ps = _rts(history.x_filt, history.P_filt, history.x_pred, history.P_pred, history.F)
    return SmoothedHistory(history.times, xs, Ps)


def smooth_and_resample(history: FilterHistory, imu: Sequence[ImuSample], t_radar,
                        smoothed: SmoothedHistory | None = None) -> list[Pose]:
    """Smoothed body poses exactly at the radar timestamps."""
    sm = smooth(history) if smoothed is None else smoothed
    t_radar = np.asarray(t_radar, dtype=float)
    times = sm.times
    if t_radar.size and (t_radar.min() < times[0] - 1e-12 or t_radar.max() > times[-1] + 1e-12):
        raise EstimationError("radar timestamp outside the estimated time span")
    imu = sorted(imu, key=lambda s: s.time)
    imu_t = np.array([s.time for s in imu])
    out = []
    for tr in t_radar:
        k = int(np.searchsorted(times, tr, side="right")) - 1
        k = max(k, 0)
        x = sm.x[k]
        dt = tr - times[k]
        if dt > 1e-12:
            j = min(int(np.searchsorted(imu_t, tr - 1e-12)), len(imu) - 1)
            s = imu[j]
            x = _propagate_nominal(x, np.asarray(s.angular_rate, float),
                                   np.asarray(s.linear_acceleration, float), dt, _G)
        out.append(Pose(float(tr), Transform(x[6:10], x[0:3])))
    return out


def dead_reckon(state: StateEstimate, imu: Sequence[ImuSample]) -> FilterHistory:
    """IMU-only integration (no fixes) for comparison."""
    return run_filter(state, imu, [], Transform(), FilterConfig())


def antenna_phase_centers(poses: Sequence[Pose], t_ba1: Transform, t_ba2: Transform):
    return antenna_track(poses, t_ba1), antenna_track(poses, t_ba2)


# --- end-to-end estimation ------------------------------------------------------


def initialize_from_sensors(imu: Sequence[ImuSample], prism: Sequence[PrismMeasurement],
                            heading: float, t_bp: Transform, config: FilterConfig = FilterConfig(),
                            fit_window: float = 1.0) -> StateEstimate:
    """Take-off initialization.

    Roll and pitch come from the mean specific force over the fit window,
    yaw from the magnetometer heading. Position and velocity come from a
    quadratic fit to the prism fixes over the first ``fit_window`` seconds,
    evaluated at the first fix.
    """
    t0 = prism[0].time
    sel = [m for m in prism if m.time <= t0 + fit_window]
    if len(sel) < 3:
        sel = list(prism[:3])
    tt = np.array([m.time - t0 for m in sel])
    pp = np.array([m.position for m in sel])
    coef = np.polyfit(tt, pp, 2)
    p0, v0 = coef[2], coef[1]
    f = np.mean([s.linear_acceleration for s in imu if s.time <= t0 + fit_window], axis=0)
    roll = np.arctan2(f[1], f[2])
    pitch = np.arctan2(-f[0], np.hypot(f[1], f[2]))
    q0 = quat_from_euler(roll, pitch, heading)
    pb = p0 - quat_to_matrix(q0) @ t_bp.translation
    return initial_state(t0, pb, v0, q0, config)


@dataclass(frozen=True, eq=False)
class FusionResult:
    history: FilterHistory
    smoothed: SmoothedHistory
    poses: list


def estimate_trajectory(imu, prism, heading, t_bp: Transform, t_radar,
                        config: FilterConfig = FilterConfig()) -> FusionResult:
    state = initialize_from_sensors(imu, prism, heading, t_bp, config)
    hist = run_filter(state, imu, prism, t_bp, config)
    sm = smooth(hist)
    return FusionResult(hist, sm, smooth_and_resample(hist, imu, t_radar, sm))


def truth_at(truth: Trajectory, t) -> np.ndarray:
    """Linear interpolation of truth positions (dense truth assumed)."""
    t = np.asarray(t, float)
    return np.stack([np.interp(t, truth.times, truth.positions[:, i]) for i in range(3)], axis=-1)


def interpolate_prism(prism: Sequence[PrismMeasurement], t) -> np.ndarray:
    tt = np.array([m.time for m in prism])
    pp = np.array([m.position for m in prism])
    return np.stack([np.interp(t, tt, pp[:, i]) for i in range(3)], axis=-1)


def write_trajectory_csv(path, poses: Sequence[Pose]) -> None:
    with open(path, "w") as fh:
        fh.write("t,x,y,z,qw,qx,qy,qz\n")
        for p in poses:
            q, x = p.transform.rotation, p.transform.translation
            fh.write(",".join(f"{v:.12g}" for v in (p.time, *x, *q)) + "\n")


def read_trajectory_csv(path) -> list[Pose]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return [Pose(float(r[0]), Transform(r[4:8], r[1:4])) for r in data]
