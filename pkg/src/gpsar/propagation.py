"""Two-media (air over soil) propagation with a flat horizontal interface.

The refraction point is the Fermat travel-time minimum along the
horizontal line joining the antenna and pixel ground projections. The
derivative of the travel time with respect to the horizontal crossing
offset is the Snell residual ``sin(theta_i)/c0 - sin(theta_t)/c1``,
which is strictly increasing, so a safeguarded Newton iteration on a
fixed bracket always terminates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import C0

_MAX_ITER = 60
# relative step tolerance on the soil leg. STRICT keeps the Snell residual
# near rounding level; FAST is enough for delays, which are stationary in u.
STRICT_RTOL = 1e-14
FAST_RTOL = 1e-10


def wave_speed(er: float) -> float:
    if er < 1.0:
        raise ValueError(f"relative permittivity must be >= 1, got {er}")
    return C0 / np.sqrt(er)


@njit(cache=True, nogil=True)
def _solve_crossing(h, d, dist, c1, rtol):
    """Horizontal legs of the refracted path.

    ``h`` antenna height above the interface, ``d`` pixel depth below it,
    ``dist`` horizontal antenna-pixel distance. Returns ``(x, u, iterations)``
    with ``x`` the air leg and ``u = dist - x`` the soil leg. The iteration
    runs on ``u``, which is small for slow soils and keeps full precision.
    It stops once a Newton step is below ``rtol * (u + d)``.
    """
    if dist == 0.0:
        return 0.0, 0.0, 0
    lo = 0.0
    hi = dist
    # start from Snell's law with the air angle frozen at the nadir-to-pixel angle
    s = dist / np.sqrt(dist * dist + h * h) * c1 / C0
    u = d * s / np.sqrt(1.0 - s * s)
    if u >= hi:
        u = 0.5 * hi
    for it in range(_MAX_ITER):
        x = dist - u
        r0 = np.sqrt(x * x + h * h)
        r1 = np.sqrt(u * u + d * d)
        g = x / (C0 * r0) - u / (c1 * r1)
        if g > 0.0:
            lo = u
        else:
            hi = u
        gp = h * h / (C0 * r0 * r0 * r0) + d * d / (c1 * r1 * r1 * r1)
        step = g / gp
        if abs(step) <= rtol * (u + d):
            # converged; a rounding-level step may sit just outside the bracket
            un = min(max(u + step, lo), hi)
            return dist - un, un, it + 1
        un = u + step
        if not (lo < un < hi):
            un = 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * hi:
            return dist - un, un, it + 1
        u = un
    return dist - u, u, _MAX_ITER


@njit(cache=True, nogil=True)
def one_way_delay(ax, ay, az, px, py, pz, interface_z, c1):
    """One-way delay (s) antenna -> pixel, straight path if the pixel is not below the interface."""
    dx = px - ax
    dy = py - ay
    if pz >= interface_z or c1 == C0:
        return np.sqrt(dx * dx + dy * dy + (pz - az) * (pz - az)) / C0
    h = az - interface_z
    d = interface_z - pz
    dist = np.sqrt(dx * dx + dy * dy)
    x, u, _ = _solve_crossing(h, d, dist, c1, STRICT_RTOL)
    return np.sqrt(x * x + h * h) / C0 + np.sqrt(u * u + d * d) / c1


@njit(cache=True, nogil=True)
def one_way_delays(antennas, pixels, interface_z, c1):
    """Elementwise :func:`one_way_delay` for ``(n, 3)`` antenna and pixel arrays."""
    n = antennas.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = one_way_delay(
            antennas[i, 0], antennas[i, 1], antennas[i, 2],
            pixels[i, 0], pixels[i, 1], pixels[i, 2], interface_z, c1,
        )
    return out


@dataclass(frozen=True, eq=False)
class PathSolution:
    crossing: np.ndarray
    r0: float
    r1: float
    delay_one_way: float
    snell_residual: float = 0.0
    iterations: int = 0


def refraction_point(antenna, pixel, interface_z: float, er: float) -> PathSolution:
    """Solve the refracted antenna-to-pixel path.

    For pixels at or above the interface the straight path is returned
    with ``r1 = 0`` and ``crossing`` set to the pixel itself.
    """
    a = np.asarray(antenna, dtype=float)
    p = np.asarray(pixel, dtype=float)
    if not a[2] > interface_z:
        raise ValueError("antenna must be strictly above the interface")
    c1 = wave_speed(er)
    if p[2] >= interface_z:
        r0 = float(np.linalg.norm(p - a))
        return PathSolution(p.copy(), r0, 0.0, r0 / C0)
    h = a[2] - interface_z
    d = interface_z - p[2]
    horiz = p[:2] - a[:2]
    dist = float(np.hypot(*horiz))
    if er == 1.0:
        x = dist * h / (h + d)
        u = dist - x
        it = 0
    else:
        x, u, it = _solve_crossing(h, d, dist, c1, STRICT_RTOL)
    direction = horiz / dist if dist > 0 else np.zeros(2)
    crossing = np.array([*(a[:2] + x * direction), interface_z])
    r0 = float(np.hypot(x, h))
    r1 = float(np.hypot(u, d))
    sin_i = x / r0
    sin_t = u / r1 if r1 > 0 else 0.0
    # dimensionless: n0 sin(theta_i) - n1 sin(theta_t)
    return PathSolution(crossing, r0, r1, r0 / C0 + r1 / c1, abs(sin_i - np.sqrt(er) * sin_t), it)


def round_trip_time(tx, rx, pixel, interface_z: float, er: float, mode: str = "bistatic") -> float:
    """Transmit -> pixel -> receive delay in seconds.

    ``mode="bistatic"`` sums two independent refracted one-way paths;
    ``mode="monostatic"`` doubles the one-way path from the tx/rx midpoint.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if mode == "bistatic":
        return (
            refraction_point(tx, pixel, interface_z, er).delay_one_way
            + refraction_point(rx, pixel, interface_z, er).delay_one_way
        )
    if mode == "monostatic":
        return 2.0 * refraction_point(0.5 * (tx + rx), pixel, interface_z, er).delay_one_way
    raise ValueError(f"unknown mode {mode!r}")
