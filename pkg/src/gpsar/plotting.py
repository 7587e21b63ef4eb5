"""Report figures written next to the CSV outputs (non-interactive Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
}
# fixed metadata keeps reruns byte-identical
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def plot_depth_profiles(path, profiles: dict, true_depths: dict | None = None):
    """``profiles`` maps target id to a :class:`~gpsar.analysis.DepthProfile`."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        cmap = plt.get_cmap("viridis", max(len(profiles), 2))
        for k, (tid, prof) in enumerate(sorted(profiles.items())):
            ax.plot(prof.amplitude_db, prof.z * 1e3, color=cmap(k), lw=1.0, label=f"{tid}")
            if true_depths and tid in true_depths:
                ax.axhline(true_depths[tid] * 1e3, color=cmap(k), ls=":", lw=0.6)
        ax.set_xlabel("amplitude [dB re volume max]")
        ax.set_ylabel("focus plane z [mm]")
        if len(profiles) <= 16:
            ax.legend(title="target", fontsize=6, ncol=2, loc="lower left")
        _save(fig, path)


def plot_histograms(path, hists: dict):
    """``hists`` maps plane z (m) to ``(counts, edges)``."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for z, (counts, edges) in sorted(hists.items(), reverse=True):
            centers = 0.5 * (edges[1:] + edges[:-1])
            density = counts / max(counts.sum(), 1) / np.diff(edges)
            ax.plot(centers, density, lw=1.0, label=f"z = {z * 1e3:.0f} mm")
        ax.set_xlabel("amplitude [dB re plane max]")
        ax.set_ylabel("density [1/dB]")
        ax.legend(fontsize=7)
        _save(fig, path)


def plot_detections(path, volume, reports, truth_xy=(), clip_db: float = 40.0):
    """Maximum-intensity projection over z with grouped detections and truth."""
    g = volume.grid
    mag = np.abs(volume.data).max(axis=0)
    ref = mag.max() or 1.0
    with np.errstate(divide="ignore"):
        db = np.maximum(20 * np.log10(mag / ref), -clip_db)
    extent = (g.x[0] - g.dx / 2, g.x[-1] + g.dx / 2, g.y[0] - g.dy / 2, g.y[-1] + g.dy / 2)
    with plt.rc_context({**_STYLE, "axes.grid": False}):
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        im = ax.imshow(db, origin="lower", extent=extent, cmap="gray", vmin=-clip_db, vmax=0, aspect="equal")
        fig.colorbar(im, ax=ax, label="dB")
        truth_xy = np.asarray(truth_xy, float).reshape(-1, 2)
        if len(truth_xy):
            ax.scatter(truth_xy[:, 0], truth_xy[:, 1], s=60, facecolors="none", edgecolors="tab:green",
                       label="truth")
        if reports:
            ax.scatter([r.x for r in reports], [r.y for r in reports], marker="x", color="tab:red", s=25,
                       label="detected")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.legend(fontsize=7, loc="upper right")
        _save(fig, path)


def plot_psf(path, volume, metrics):
    """Cuts through the strongest measured peak along x, y and z."""
    k, iy, ix = metrics.peak_index
    g = volume.grid
    mag = np.abs(volume.data)
    peak = mag[k, iy, ix]
    with np.errstate(divide="ignore"):
        cuts = [
            (g.x - g.x[ix], 20 * np.log10(mag[k, iy, :] / peak), "x (cross-range)"),
            (g.y - g.y[iy], 20 * np.log10(mag[k, :, ix] / peak), "y (ground-range)"),
            (g.z - g.z[k], 20 * np.log10(mag[:, iy, ix] / peak), "z"),
        ]
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9.0, 3.0), sharey=True)
        for ax, (off, db, name) in zip(axes, cuts):
            ax.plot(off * 1e2, db, ".-", lw=0.8, ms=3)
            ax.axhline(-3.0, color="k", ls="--", lw=0.6)
            ax.set_xlabel(f"{name} offset [cm]")
            ax.set_ylim(-40, 1)
        axes[0].set_ylabel("dB re peak")
        _save(fig, path)
