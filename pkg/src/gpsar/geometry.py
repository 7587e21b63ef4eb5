"""Rigid transforms, poses and circular aperture trajectories.

Quaternions are stored as ``[w, x, y, z]`` (Hamilton convention) and a
:class:`Transform` maps points from its own frame into the parent
(world) frame: ``p_world = R @ p_frame + t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

C0 = 299_792_458.0


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("quaternion must have finite nonzero norm")
    q = q / n
    # canonical hemisphere keeps equality checks meaningful
    return -q if q[0] < 0 else q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_rotvec(v: np.ndarray) -> np.ndarray:
    """Exponential map from a rotation vector (axis * angle) to a unit quaternion."""
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        # second-order series, exact to rounding at this size
        q = np.array([1.0 - angle**2 / 8.0, *(0.5 * v)])
        return q / np.linalg.norm(q)
    axis = v / angle
    return np.array([np.cos(angle / 2), *(np.sin(angle / 2) * axis)])


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    q = quat_normalize(q)
    s = np.linalg.norm(q[1:])
    if s < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(s, q[0])
    return angle * q[1:] / s


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return quat_from_rotvec(axis / np.linalg.norm(axis) * angle)


def quat_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Z-Y-X (yaw, pitch, roll) Euler angles to quaternion."""
    qz = quat_from_axis_angle([0, 0, 1], yaw)
    qy = quat_from_axis_angle([0, 1, 0], pitch)
    qx = quat_from_axis_angle([1, 0, 0], roll)
    return quat_normalize(quat_multiply(quat_multiply(qz, qy), qx))


def yaw_of(q: np.ndarray) -> float:
    w, x, y, z = q
    return float(np.arctan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z)))


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid 6-DoF transform (world-from-frame)."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", quat_normalize(self.rotation))
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Transform":
        return cls()

    @classmethod
    def from_euler(cls, roll=0.0, pitch=0.0, yaw=0.0, translation=(0.0, 0.0, 0.0)) -> "Transform":
        return cls(quat_from_euler(roll, pitch, yaw), np.asarray(translation, dtype=float))

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def __matmul__(self, other: "Transform") -> "Transform":
        return compose(self, other)

    def __repr__(self):
        q = np.array2string(self.rotation, precision=6)
        t = np.array2string(self.translation, precision=6)
        return f"Transform(rotation={q}, translation={t})"


@dataclass(frozen=True, eq=False)
class Pose:
    time: float
    transform: Transform

    @property
    def position(self) -> np.ndarray:
        return self.transform.translation


def compose(a: Transform, b: Transform) -> Transform:
    """Return ``a * b``: the transform that applies ``b`` first, then ``a``."""
    q = quat_multiply(a.rotation, b.rotation)
    t = a.translation + quat_to_matrix(a.rotation) @ b.translation
    return Transform(q, t)


def inverse(t: Transform) -> Transform:
    qi = quat_conjugate(t.rotation)
    return Transform(qi, -(quat_to_matrix(qi) @ t.translation))


def apply(t: Transform, p) -> np.ndarray:
    """Map point(s) ``p`` (shape ``(3,)`` or ``(n, 3)``) into the parent frame."""
    p = np.asarray(p, dtype=float)
    return p @ quat_to_matrix(t.rotation).T + t.translation


def rotation_angle_between(a: Transform, b: Transform) -> float:
    d = quat_multiply(quat_conjugate(a.rotation), b.rotation)
    return float(np.linalg.norm(quat_to_rotvec(d)))


@dataclass(frozen=True)
class CircleSpec:
    """Constant-speed circular flight path around ``center`` at absolute ``height``.

    Attributes
    ----------
    center : (3,) array-like
        Circle center; only x and y are used, z comes from ``height``.
    radius, height, speed, prf : float
        Geometry in m, speed in m/s, chirp rate in Hz.
    start_azimuth, arc : float
        Start angle and swept angle (rad), counter-clockwise.
    """

    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 7.75
    height: float = 3.75
    speed: float = 0.4
    prf: float = 30.0
    start_azimuth: float = 0.0
    arc: float = 2 * np.pi

    def validate(self) -> None:
        for name in ("radius", "speed", "prf"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.arc > 0:
            raise ValueError(f"arc must be positive, got {self.arc!r}")
        if self.prf * self.arc * self.radius / self.speed < 1:
            raise ValueError("arc too short for a single sample at this speed and prf")

    @property
    def spacing(self) -> float:
        return self.speed / self.prf

    @property
    def n_samples(self) -> int:
        # samples at arc lengths 0, s, 2s, ... that do not exceed the arc
        return int(np.floor(self.arc * self.radius / self.spacing + 1e-9)) + 1

    @property
    def duration(self) -> float:
        return self.arc * self.radius / self.speed


def circle_state(spec: CircleSpec, t):
    """Analytic position, velocity, yaw, yaw rate of the circular path at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    omega = spec.speed / spec.radius
    az = spec.start_azimuth + omega * t
    cx, cy = spec.center[0], spec.center[1]
    pos = np.stack(
        [cx + spec.radius * np.cos(az), cy + spec.radius * np.sin(az), np.full_like(az, spec.height)],
        axis=-1,
    )
    vel = np.stack(
        [-spec.speed * np.sin(az), spec.speed * np.cos(az), np.zeros_like(az)], axis=-1
    )
    yaw = az + np.pi / 2
    return pos, vel, yaw, omega


def circular_trajectory(spec: CircleSpec) -> list[Pose]:
    """Body poses sampled every ``1/prf`` seconds along the arc.

    The body x-axis points along the velocity (tangent), so the +y axis
    (left side) looks toward the circle center; roll and pitch are zero.
    """
    spec.validate()
    t = np.arange(spec.n_samples) / spec.prf
    pos, _, yaw, _ = circle_state(spec, t)
    return [
        Pose(float(ti), Transform(quat_from_axis_angle([0, 0, 1], yi), pi))
        for ti, pi, yi in zip(t, pos, yaw)
    ]


def antenna_track(body: Sequence[Pose], t_ba: Transform) -> list[Pose]:
    """World poses of a sensor rigidly mounted at ``t_ba`` in the body frame."""
    return [Pose(p.time, compose(p.transform, t_ba)) for p in body]


def predicted_resolution(radar, incidence: float, er: float = 1.0, medium: str = "air"):
    """Closed-form CSAR resolution for a full-circle isotropic target.

    Returns ``(cross_range, ground_range, z)`` in metres. For ``medium="soil"``
    the z resolution uses the refracted angle and the in-soil wave speed.
    """
    if not 0.0 < incidence < np.pi / 2:
        raise ValueError("incidence angle must lie in the open interval (0, pi/2)")
    if er < 1.0:
        raise ValueError("relative permittivity must be >= 1")
    f_max = radar.f0 + radar.bandwidth
    d_cr = C0 / (4.0 * f_max * np.sin(incidence))
    if medium == "air":
        theta, c = incidence, C0
    elif medium == "soil":
        theta = np.arcsin(np.sin(incidence) / np.sqrt(er))
        c = C0 / np.sqrt(er)
    else:
        raise ValueError(f"unknown medium {medium!r}")
    d_z = 4.0 / (np.sqrt(2 * np.pi) * np.cos(theta)) * c / (2.0 * radar.bandwidth)
    return float(d_cr), float(d_cr), float(d_z)


def incidence_angle(height: float, radius: float) -> float:
    return float(np.arctan2(radius, height))
