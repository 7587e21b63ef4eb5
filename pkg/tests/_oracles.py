"""Independent reference implementations used as test oracles."""

import numpy as np
from numba import njit

C0 = 299_792_458.0


@njit(cache=True, fastmath=True)
def scan_travel_time(h, d, dist, c1, n):
    """Minimum one-way time over ``n`` evenly spaced crossing offsets, and its offset."""
    best = np.inf
    best_x = 0.0
    step = dist / (n - 1)
    for i in range(n):
        x = i * step
        u = dist - x
        t = np.sqrt(x * x + h * h) / C0 + np.sqrt(u * u + d * d) / c1
        if t < best:
            best = t
            best_x = x
    return best, best_x


@njit(cache=True, fastmath=True)
def scan_min_time(h, d, dist, c1, n):
    """Same scan without the argmin; vectorizes and is several times faster."""
    best = np.inf
    step = dist / (n - 1)
    for i in range(n):
        x = i * step
        u = dist - x
        best = min(best, np.sqrt(x * x + h * h) / C0 + np.sqrt(u * u + d * d) / c1)
    return best


def dense_dft(x, freqs, fs):
    """Direct DFT of ``x`` evaluated at arbitrary frequencies (Hz)."""
    n = np.arange(len(x))
    return np.exp(-2j * np.pi * np.outer(freqs, n) / fs) @ x


def union_find_labels(points, radius):
    """O(n^2) single-linkage partition under Euclidean distance <= radius."""
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(np.asarray(points[i]) - np.asarray(points[j])) <= radius:
                parent[find(i)] = find(j)
    roots = [find(i) for i in range(n)]
    return {frozenset(k for k in range(n) if roots[k] == r) for r in set(roots)}
