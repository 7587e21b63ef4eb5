"""Target amplitude extraction, depth profiles and image histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import GridSpec, ImageVolume


@dataclass(frozen=True)
class BoxRegion:
    center: tuple
    half_extent: tuple = (0.25, 0.25)

    def __post_init__(self):
        if not (self.half_extent[0] > 0 and self.half_extent[1] > 0):
            raise ValueError("box half extents must be positive")

    def index_slices(self, grid: GridSpec) -> tuple[slice, slice]:
        """(row, column) slices of the pixels whose centers fall inside the box."""
        (cx, cy), (hx, hy) = self.center, self.half_extent
        eps = 1e-9
        ix0 = max(0, int(np.ceil((cx - hx - grid.x0) / grid.dx - eps)))
        ix1 = min(grid.nx - 1, int(np.floor((cx + hx - grid.x0) / grid.dx + eps)))
        iy0 = max(0, int(np.ceil((cy - hy - grid.y0) / grid.dy - eps)))
        iy1 = min(grid.ny - 1, int(np.floor((cy + hy - grid.y0) / grid.dy + eps)))
        if ix1 < ix0 or iy1 < iy0:
            raise ValueError(f"box centered at {self.center} does not overlap the grid")
        return slice(iy0, iy1 + 1), slice(ix0, ix1 + 1)


def _db(value, reference):
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(np.asarray(value, float) / reference)


def extract_target_amplitude(plane, grid: GridSpec, box: BoxRegion, reference: float = 1.0):
    """Largest magnitude inside ``box`` as dB re ``reference``, and its (x, y)."""
    rows, cols = box.index_slices(grid)
    sub = np.abs(np.asarray(plane))[rows, cols]
    iy, ix = np.unravel_index(int(np.argmax(sub)), sub.shape)
    iy += rows.start
    ix += cols.start
    amp = float(_db(np.abs(plane[iy, ix]), reference))
    return amp, (float(grid.x[ix]), float(grid.y[iy]))


@dataclass(frozen=True, eq=False)
class DepthProfile:
    z: np.ndarray  # descending
    amplitude_db: np.ndarray
    locations: np.ndarray  # (n, 2) box-max positions per plane

    @property
    def samples(self):
        return list(zip(self.z.tolist(), self.amplitude_db.tolist()))

    @property
    def span_db(self) -> float:
        a = self.amplitude_db[np.isfinite(self.amplitude_db)]
        return float(a.max() - a.min())


def depth_profile(volume: ImageVolume, box: BoxRegion, reference: float | None = None) -> DepthProfile:
    """Box-maximum amplitude per focus plane, in dB re the volume maximum by default."""
    if reference is None:
        reference = float(np.abs(volume.data).max()) or 1.0
    amps, locs = [], []
    for plane in volume.data:
        a, loc = extract_target_amplitude(plane, volume.grid, box, reference)
        amps.append(a)
        locs.append(loc)
    return DepthProfile(volume.grid.z.copy(), np.array(amps), np.array(locs))


def estimate_depth(profile: DepthProfile) -> float:
    """Depth of the profile maximum; ties go to the shallower plane."""
    a = np.asarray(profile.amplitude_db)
    if a.size == 0:
        raise ValueError("empty profile")
    best = np.max(a)
    z = np.asarray(profile.z)[a == best]
    return float(z.max())


def local_maxima(profile: DepthProfile) -> list[float]:
    a = profile.amplitude_db
    idx = [i for i in range(1, len(a) - 1) if a[i] > a[i - 1] and a[i] >= a[i + 1]]
    return [float(profile.z[i]) for i in idx]


def amplitude_histogram(plane, bins: int = 100, range_db=(-60.0, 0.0), reference: float | None = None):
    """Histogram of per-pixel magnitude in dB re ``reference`` (plane maximum by default).

    Values outside ``range_db`` are counted in the end bins so the counts
    always sum to the pixel count. Returns ``(counts, bin_edges)``.
    """
    if bins < 2:
        raise ValueError("need at least two bins")
    mag = np.abs(np.asarray(plane)).ravel()
    if reference is None:
        reference = float(mag.max()) or 1.0
    lo, hi = range_db
    db = np.clip(np.nan_to_num(_db(mag, reference), neginf=lo), lo, hi)
    counts, edges = np.histogram(db, bins=bins, range=(lo, hi))
    return counts, edges


def bin_centers(edges) -> np.ndarray:
    edges = np.asarray(edges)
    return 0.5 * (edges[1:] + edges[:-1])


def rayleigh_db_cdf(db, sigma: float, reference: float = 1.0):
    """CDF of ``20 log10(|z| / reference)`` for circular complex Gaussian ``z``
    with per-component standard deviation ``sigma``."""
    r = reference * 10.0 ** (np.asarray(db, float) / 20.0)
    return 1.0 - np.exp(-(r**2) / (2.0 * sigma**2))
