"""Refraction-corrected time-domain back-projection onto focus-plane stacks.

Each voxel is the coherent sum over chirps of the interpolated range
profile at the voxel's round-trip delay, multiplied by the conjugate of
the expected dechirp phase. The per-pixel refraction solve is exact.

Work is split into row tiles run on a thread pool; the numba kernel
releases the GIL. Every voxel is written by exactly one tile and sums
its chirps in index order, so the result does not depend on the worker
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit

from .geometry import C0
from .propagation import FAST_RTOL, _solve_crossing, wave_speed
from .signal import ProfileStack, RadarParams, RangeProfile


@dataclass(frozen=True)
class GridSpec:
    """Focusing grid. ``(x0, y0)`` is the center of pixel ``[0, 0]``; planes run
    from ``z_top`` down to ``z_bottom`` in steps of ``dz``."""

    x0: float = -0.32
    y0: float = -0.32
    dx: float = 0.005
    dy: float = 0.005
    nx: int = 128
    ny: int = 128
    z_top: float = 0.1
    z_bottom: float = -0.2
    dz: float = 0.005

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("nx", "ny"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.z_top >= self.z_bottom:
            raise ValueError("z_top must not lie below z_bottom")

    @classmethod
    def centered(cls, cx, cy, half_x, half_y, pitch, z_top=0.1, z_bottom=-0.2, dz=0.005):
        nx = int(round(2 * half_x / pitch)) + 1
        ny = int(round(2 * half_y / pitch)) + 1
        return cls(cx - (nx - 1) / 2 * pitch, cy - (ny - 1) / 2 * pitch, pitch, pitch, nx, ny,
                   z_top, z_bottom, dz)

    @property
    def n_planes(self) -> int:
        return int(round((self.z_top - self.z_bottom) / self.dz)) + 1

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    @property
    def z(self) -> np.ndarray:
        """Plane heights, descending."""
        return self.z_top - self.dz * np.arange(self.n_planes)

    @property
    def xy_box(self):
        return (self.x[0], self.x[-1]), (self.y[0], self.y[-1])

    def single_plane(self, z0: float) -> "GridSpec":
        return replace(self, z_top=z0, z_bottom=z0)

    def plane_index(self, z0: float) -> int:
        return int(np.argmin(np.abs(self.z - z0)))

    def pixel_of(self, x: float, y: float) -> tuple[int, int]:
        """(iy, ix) of the pixel nearest to ``(x, y)``."""
        return int(round((y - self.y0) / self.dy)), int(round((x - self.x0) / self.dx))


@dataclass(frozen=True, eq=False)
class ImageVolume:
    grid: GridSpec
    data: np.ndarray  # (n_planes, ny, nx) complex, z descending
    er: float
    interface_z: float = 0.0
    aperture_ids: tuple = ()
    n_chirps: int = 0

    def __post_init__(self):
        g = self.grid
        if self.data.shape != (g.n_planes, g.ny, g.nx):
            raise ValueError(f"data shape {self.data.shape} does not match grid")

    @property
    def planes(self):
        return self.data

    @property
    def z(self):
        return self.grid.z

    def plane(self, z0: float) -> np.ndarray:
        return self.data[self.grid.plane_index(z0)]

    def magnitude_db(self, clip_db: float | None = 40.0) -> np.ndarray:
        mag = np.abs(self.data)
        peak = mag.max()
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(mag / peak) if peak > 0 else np.full(mag.shape, -np.inf)
        if clip_db is not None:
            db = np.maximum(db, -clip_db)
        return db


@njit(cache=True, nogil=True)
def _bp_tile(bins, start_bin, dpb, tx, rx, mono, xs, ys, zs, interface_z, c1, f0, slope,
             row_lo, row_hi, out):
    n_chirps, n_bins = bins.shape
    nz = zs.shape[0]
    nx = xs.shape[0]
    two_pi_f0 = 2.0 * np.pi * f0
    pi_k = np.pi * slope
    for n in range(n_chirps):
        b = bins[n]
        tax, tay, taz = tx[n, 0], tx[n, 1], tx[n, 2]
        rax, ray, raz = rx[n, 0], rx[n, 1], rx[n, 2]
        ht = taz - interface_z
        hr = raz - interface_z
        for iy in range(row_lo, row_hi):
            py = ys[iy]
            for ix in range(nx):
                px = xs[ix]
                # horizontal geometry shared by every plane of this column
                dtx = px - tax
                dty = py - tay
                dt2 = dtx * dtx + dty * dty
                dist_t = math.sqrt(dt2)
                if not mono:
                    drx = px - rax
                    dry = py - ray
                    dr2 = drx * drx + dry * dry
                    dist_r = math.sqrt(dr2)
                for k in range(nz):
                    pz = zs[k]
                    if pz >= interface_z or c1 == C0:
                        dz_t = pz - taz
                        delay = math.sqrt(dt2 + dz_t * dz_t) / C0
                        if mono:
                            delay *= 2.0
                        else:
                            dz_r = pz - raz
                            delay += math.sqrt(dr2 + dz_r * dz_r) / C0
                    else:
                        d = interface_z - pz
                        x, u, _ = _solve_crossing(ht, d, dist_t, c1, FAST_RTOL)
                        delay = math.sqrt(x * x + ht * ht) / C0 + math.sqrt(u * u + d * d) / c1
                        if mono:
                            delay *= 2.0
                        else:
                            x, u, _ = _solve_crossing(hr, d, dist_r, c1, FAST_RTOL)
                            delay += math.sqrt(x * x + hr * hr) / C0 + math.sqrt(u * u + d * d) / c1
                    pos = delay / dpb - start_bin
                    if pos < 0.0:
                        continue
                    i = int(pos)
                    if i >= n_bins - 1:
                        continue
                    f = pos - i
                    v = b[i] * (1.0 - f) + b[i + 1] * f
                    ph = two_pi_f0 * delay - pi_k * delay * delay
                    out[k, iy, ix] += v * complex(math.cos(ph), -math.sin(ph))


def _as_stack(profiles) -> ProfileStack:
    if isinstance(profiles, ProfileStack):
        stack = profiles
    else:
        profiles = list(profiles)
        if not profiles:
            raise ValueError("empty profile set")
        stack = ProfileStack.from_profiles(profiles)
    if len(stack) == 0:
        raise ValueError("empty profile set")
    return stack


def _row_tiles(ny: int, workers: int):
    n_tiles = min(ny, max(1, 4 * workers))
    edges = np.linspace(0, ny, n_tiles + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _focus(stack: ProfileStack, grid: GridSpec, zs, interface_z, er, radar, workers, mode):
    if er < 1.0:
        raise ValueError("er must be >= 1")
    if mode not in ("bistatic", "monostatic"):
        raise ValueError(f"unknown mode {mode!r}")
    mono = mode == "monostatic"
    tx = np.ascontiguousarray(stack.tx, dtype=np.float64)
    rx = np.ascontiguousarray(stack.rx, dtype=np.float64)
    if mono:
        tx = rx = 0.5 * (tx + rx)
    if np.any(tx[:, 2] <= interface_z) or np.any(rx[:, 2] <= interface_z):
        raise ValueError("antenna positions must lie above the interface")
    bins = np.ascontiguousarray(stack.bins, dtype=np.complex128)
    zs = np.asarray(zs, dtype=np.float64)
    out = np.zeros((len(zs), grid.ny, grid.nx), dtype=np.complex128)
    args = (bins, stack.start_bin, stack.delay_per_bin, tx, rx, mono, grid.x, grid.y, zs,
            float(interface_z), wave_speed(er), radar.f0, radar.slope)
    tiles = _row_tiles(grid.ny, workers)
    if workers <= 1:
        for lo, hi in tiles:
            _bp_tile(*args, lo, hi, out)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda t: _bp_tile(*args, t[0], t[1], out), tiles))
    return out


def backproject_plane(
    profiles: Sequence[RangeProfile] | ProfileStack,
    grid: GridSpec,
    z0: float,
    interface_z: float = 0.0,
    er: float = 8.0,
    radar: RadarParams | None = None,
    workers: int = 1,
    mode: str = "bistatic",
) -> np.ndarray:
    """Focus one plane at height ``z0``; returns a ``(ny, nx)`` complex array."""
    stack = _as_stack(profiles)
    return _focus(stack, grid, [z0], interface_z, er, radar or RadarParams(), workers, mode)[0]


def focus_volume(
    profiles: Sequence[RangeProfile] | ProfileStack,
    grid: GridSpec,
    interface_z: float = 0.0,
    er: float = 8.0,
    radar: RadarParams | None = None,
    workers: int = 1,
    mode: str = "bistatic",
    aperture_ids: tuple = (),
) -> ImageVolume:
    """Back-project every plane of ``grid`` (z descending)."""
    stack = _as_stack(profiles)
    data = _focus(stack, grid, grid.z, interface_z, er, radar or RadarParams(), workers, mode)
    ids = tuple(aperture_ids) or tuple(stack.aperture_ids)
    return ImageVolume(grid, data, float(er), float(interface_z), ids, len(stack))


def coherent_sum(volumes: Sequence[ImageVolume]) -> ImageVolume:
    volumes = list(volumes)
    if not volumes:
        raise ValueError("nothing to sum")
    first = volumes[0]
    for v in volumes[1:]:
        if v.grid != first.grid:
            raise ValueError("cannot sum volumes on different grids")
        if v.er != first.er or v.interface_z != first.interface_z:
            raise ValueError("cannot sum volumes focused with different media")
    # extended-precision accumulation: the sum of up to 2**11 equal terms is exact
    # before the final rounding, so n copies of a volume give exactly n * data
    acc = first.data.astype(np.clongdouble)
    for v in volumes[1:]:
        acc += v.data
    data = acc.astype(np.complex128)
    ids = tuple(i for v in volumes for i in v.aperture_ids)
    return ImageVolume(first.grid, data, first.er, first.interface_z, ids, sum(v.n_chirps for v in volumes))


# --- point-spread-function metrology -----------------------------------------


class PeakError(ValueError):
    pass


@dataclass(frozen=True)
class PsfMetrics:
    cross_range: float
    ground_range: float
    z: float
    pslr_db: float
    peak_index: tuple = field(default=())
    peak_amplitude: float = 0.0


def half_power_width(profile, spacing: float, peak: int | None = None) -> float:
    """-3 dB full width of a magnitude profile by linear interpolation."""
    m = np.abs(np.asarray(profile, dtype=complex)) if np.iscomplexobj(profile) else np.abs(np.asarray(profile, float))
    if peak is None:
        peak = int(np.argmax(m))
    top = m[peak]
    if not top > 0:
        raise PeakError("flat or empty peak")
    level = top / np.sqrt(2.0)

    def crossing(step):
        i = peak
        while True:
            j = i + step
            if j < 0 or j >= len(m):
                raise PeakError("peak is clipped by the grid edge")
            if m[j] < level:
                # fraction of the way from i to j where the level is crossed
                return (i - peak + step * (m[i] - level) / (m[i] - m[j])) * 1.0
            i = j

    right = crossing(1)
    left = crossing(-1)
    width = (right - left) * spacing
    if width <= 0:
        raise PeakError("degenerate peak")
    return float(width)


def _climb(mag, idx):
    """Move from ``idx`` to the nearest local maximum by steepest ascent."""
    idx = tuple(int(i) for i in idx)
    while True:
        best = idx
        for off in np.ndindex(*(3,) * mag.ndim):
            cand = tuple(i + o - 1 for i, o in zip(idx, off))
            if all(0 <= c < s for c, s in zip(cand, mag.shape)) and mag[cand] > mag[best]:
                best = cand
        if best == idx:
            return idx
        idx = best


def _first_min_distance(line, peak):
    dists = []
    for step in (1, -1):
        i = peak
        while 0 <= i + step < len(line) and line[i + step] <= line[i]:
            i += step
        dists.append(abs(i - peak))
    return max(dists)


def psf_metrics(vol_or_plane, peak_hint=None, grid: GridSpec | None = None) -> PsfMetrics:
    """-3 dB widths through a peak and peak-to-sidelobe ratio of its plane.

    ``cross_range`` is measured along the grid x axis, ``ground_range``
    along y. For a 2D plane ``grid`` supplies the pitch and ``z`` is NaN.
    """
    if isinstance(vol_or_plane, ImageVolume):
        grid = vol_or_plane.grid
        mag = np.abs(vol_or_plane.data)
    else:
        if grid is None:
            raise ValueError("a grid is required for a bare plane")
        mag = np.abs(np.asarray(vol_or_plane))[None]
    if peak_hint is None:
        peak_hint = np.unravel_index(int(np.argmax(mag)), mag.shape)
    elif len(peak_hint) == 2:
        peak_hint = (0, *peak_hint)
    k, iy, ix = _climb(mag, peak_hint)
    if not mag[k, iy, ix] > 0:
        raise PeakError("no peak near hint")
    w_x = half_power_width(mag[k, iy, :], grid.dx, ix)
    w_y = half_power_width(mag[k, :, ix], grid.dy, iy)
    w_z = half_power_width(mag[:, iy, ix], grid.dz, k) if mag.shape[0] > 1 else float("nan")
    plane = mag[k]
    r = max(_first_min_distance(plane[iy, :], ix), _first_min_distance(plane[:, ix], iy))
    yy, xx = np.mgrid[: plane.shape[0], : plane.shape[1]]
    side = plane[(yy - iy) ** 2 + (xx - ix) ** 2 > r * r]
    peak = plane[iy, ix]
    pslr = 20 * np.log10(side.max() / peak) if side.size and side.max() > 0 else -np.inf
    return PsfMetrics(w_x, w_y, w_z, float(pslr), (k, iy, ix), float(peak))
