"""Per-plane 2D cell-averaging CFAR and grouping of detections into targets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .imaging import ImageVolume


@dataclass(frozen=True)
class CfarParams:
    guard: int = 4
    train: int = 8
    pfa: float = 1e-4

    def __post_init__(self):
        if self.guard < 0:
            raise ValueError("guard must be >= 0")
        if self.train < 1:
            raise ValueError("train must be >= 1")
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa must lie in (0, 1)")

    @property
    def window(self) -> int:
        return 2 * (self.guard + self.train) + 1

    @property
    def n_train(self) -> int:
        return self.window**2 - (2 * self.guard + 1) ** 2


def threshold_factor(n_train, pfa: float):
    """CA-CFAR multiplier for exponentially distributed power."""
    n = np.asarray(n_train, dtype=float)
    return n * (pfa ** (-1.0 / n) - 1.0)


def _box_sum(a: np.ndarray, half: int) -> np.ndarray:
    """Sum over a (2*half+1)^2 window, zero outside the array."""
    size = 2 * half + 1
    out = ndimage.uniform_filter1d(a, size, axis=0, mode="constant", cval=0.0) * size
    return ndimage.uniform_filter1d(out, size, axis=1, mode="constant", cval=0.0) * size


def ca_cfar_plane(power, params: CfarParams = CfarParams()) -> np.ndarray:
    """Boolean detection mask for a 2D power (magnitude-squared) plane.

    Cells near the border use the truncated training ring that remains
    inside the plane, with the threshold factor recomputed for that count.
    """
    p = np.asarray(power, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("expected a 2D plane")
    w = params.window
    if p.shape[0] < w or p.shape[1] < w:
        raise ValueError(f"plane {p.shape} is smaller than the {w}x{w} CFAR window")
    outer = params.guard + params.train
    ones = np.ones_like(p)
    s_out = _box_sum(p, outer)
    s_in = _box_sum(p, params.guard)
    n_out = np.rint(_box_sum(ones, outer))
    n_in = np.rint(_box_sum(ones, params.guard))
    n_t = n_out - n_in
    mean = (s_out - s_in) / n_t
    return p > threshold_factor(n_t, params.pfa) * mean


@dataclass(frozen=True)
class Detection:
    x: float
    y: float
    z: float
    amplitude_db: float
    plane_index: int


def detect_volume(volume: ImageVolume, params: CfarParams = CfarParams()) -> list[Detection]:
    """CFAR on every focus plane; each connected detected region yields one
    detection at its strongest cell, amplitude in dB re the volume maximum."""
    mag = np.abs(volume.data)
    ref = mag.max()
    if ref == 0:
        return []
    g = volume.grid
    out = []
    for k, plane in enumerate(mag):
        mask = ca_cfar_plane(plane**2, params)
        labels, n = ndimage.label(mask)
        if n == 0:
            continue
        peaks = ndimage.maximum_position(plane, labels, index=np.arange(1, n + 1))
        for iy, ix in peaks:
            amp = 20 * np.log10(plane[iy, ix] / ref)
            out.append(Detection(float(g.x[ix]), float(g.y[iy]), float(g.z[k]), float(amp), k))
    return out


@dataclass(frozen=True)
class TargetReport:
    x: float
    y: float
    z: float
    amplitude_db: float
    count: int


def label_detections(detections: Sequence[Detection], radius: float) -> np.ndarray:
    """Connected-component labels under 3D proximity ``<= radius``.

    Labels are numbered by the order of each component's first member.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    n = len(detections)
    if n == 0:
        return np.zeros(0, dtype=int)
    pts = np.array([[d.x, d.y, d.z] for d in detections])
    pairs = cKDTree(pts).query_pairs(radius * (1 + 1e-12), output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    remap = {}
    return np.array([remap.setdefault(r, len(remap)) for r in raw])


def group_detections(detections: Sequence[Detection], radius: float = 0.15) -> list[TargetReport]:
    """One report per proximity cluster, located at its strongest member.

    Reports are sorted by position so the result does not depend on the
    input order.
    """
    labels = label_detections(detections, radius)
    reports = []
    for lab in np.unique(labels):
        members = [d for d, l in zip(detections, labels) if l == lab]
        best = max(members, key=lambda d: (d.amplitude_db, d.z, -d.x, -d.y))
        reports.append(TargetReport(best.x, best.y, best.z, best.amplitude_db, len(members)))
    return sorted(reports, key=lambda r: (r.x, r.y, r.z))


@dataclass(frozen=True)
class ScoreReport:
    detected: int
    missed: int
    false_alarms: int
    matches: tuple = field(default=())  # (truth index, report index)


def score_detections(reports: Sequence[TargetReport], truth_xy, radius: float = 0.25) -> ScoreReport:
    """Match reports to ground-truth (x, y) positions within ``radius``.

    Each truth target claims at most one report (nearest first); unmatched
    reports are false alarms.
    """
    truth_xy = np.asarray(truth_xy, dtype=float).reshape(-1, 2)
    rep_xy = np.array([[r.x, r.y] for r in reports]).reshape(-1, 2)
    cand = []
    for i, t in enumerate(truth_xy):
        for j, r in enumerate(rep_xy):
            d = float(np.hypot(*(t - r)))
            if d <= radius:
                cand.append((d, i, j))
    cand.sort()
    used_t, used_r, matches = set(), set(), []
    for _, i, j in cand:
        if i in used_t or j in used_r:
            continue
        used_t.add(i)
        used_r.add(j)
        matches.append((i, j))
    return ScoreReport(len(used_t), len(truth_xy) - len(used_t), len(reports) - len(used_r),
                       tuple(sorted(matches)))
