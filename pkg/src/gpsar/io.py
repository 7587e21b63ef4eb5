"""Binary containers, PGM plane export and CSV emitters.

GPSARRAW (one file per aperture, little-endian)::

    b"GPSARRAW"
    f0, bandwidth, chirp_duration, fs, prf      5 x float64
    n_chirps, n_samples                         2 x uint32
    per chirp:
        time                                    float64
        tx quaternion (w, x, y, z), tx position 7 x float64
        rx quaternion (w, x, y, z), rx position 7 x float64
        samples                                 n_samples x complex64

GPSARVOL1 (little-endian)::

    b"GPSARVOL1"
    x0, y0, dx, dy                              4 x float64
    nx, ny                                      2 x uint32
    z_top, z_bottom, dz                         3 x float64
    er                                          float64
    n_chirps                                    uint32
    planes, z descending, each ny x nx row-major complex64
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Pose, Transform
from .imaging import GridSpec, ImageVolume
from .signal import RadarParams, RawChirp

RAW_MAGIC = b"GPSARRAW"
VOL_MAGIC = b"GPSARVOL1"
_RAW_HEADER = struct.Struct("<5d2I")
_VOL_HEADER = struct.Struct("<4d2I3ddI")


class FormatError(ValueError):
    pass


def _chirp_dtype(n_samples: int) -> np.dtype:
    return np.dtype([("time", "<f8"), ("tx", "<f8", 7), ("rx", "<f8", 7), ("samples", "<c8", n_samples)])


def write_recording(path, radar: RadarParams, chirps: Sequence[RawChirp]) -> None:
    n = radar.n_samples
    rec = np.zeros(len(chirps), dtype=_chirp_dtype(n))
    for i, c in enumerate(chirps):
        if len(c.samples) != n:
            raise FormatError(f"chirp {i} has {len(c.samples)} samples, expected {n}")
        rec["time"][i] = c.time
        rec["tx"][i] = np.concatenate([c.tx_pose.transform.rotation, c.tx_pose.transform.translation])
        rec["rx"][i] = np.concatenate([c.rx_pose.transform.rotation, c.rx_pose.transform.translation])
        rec["samples"][i] = c.samples
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(_RAW_HEADER.pack(radar.f0, radar.bandwidth, radar.chirp_duration, radar.fs, radar.prf,
                                  len(chirps), n))
        fh.write(rec.tobytes())


def _pose(time, v):
    return Pose(float(time), Transform(v[:4], v[4:]))


def read_recording(path) -> tuple[RadarParams, list[RawChirp]]:
    data = Path(path).read_bytes()
    if data[: len(RAW_MAGIC)] != RAW_MAGIC:
        raise FormatError(f"{path}: not a GPSARRAW file")
    off = len(RAW_MAGIC)
    f0, bw, tc, fs, prf, n_chirps, n = _RAW_HEADER.unpack_from(data, off)
    off += _RAW_HEADER.size
    dt = _chirp_dtype(n)
    if len(data) - off != n_chirps * dt.itemsize:
        raise FormatError(f"{path}: truncated or oversized payload")
    rec = np.frombuffer(data, dtype=dt, count=n_chirps, offset=off)
    radar = RadarParams(f0, bw, tc, fs, prf)
    chirps = [
        RawChirp(float(r["time"]), _pose(r["time"], r["tx"]), _pose(r["time"], r["rx"]),
                 r["samples"].astype(np.complex128))
        for r in rec
    ]
    return radar, chirps


def write_volume(path, volume: ImageVolume) -> None:
    g = volume.grid
    with open(path, "wb") as fh:
        fh.write(VOL_MAGIC)
        fh.write(_VOL_HEADER.pack(g.x0, g.y0, g.dx, g.dy, g.nx, g.ny, g.z_top, g.z_bottom, g.dz,
                                  volume.er, volume.n_chirps))
        fh.write(np.ascontiguousarray(volume.data, dtype="<c8").tobytes())


def read_volume(path, interface_z: float = 0.0) -> ImageVolume:
    data = Path(path).read_bytes()
    if data[: len(VOL_MAGIC)] != VOL_MAGIC:
        raise FormatError(f"{path}: not a GPSARVOL1 file")
    off = len(VOL_MAGIC)
    x0, y0, dx, dy, nx, ny, zt, zb, dz, er, n = _VOL_HEADER.unpack_from(data, off)
    off += _VOL_HEADER.size
    grid = GridSpec(x0, y0, dx, dy, nx, ny, zt, zb, dz)
    count = grid.n_planes * ny * nx
    if len(data) - off != count * 8:
        raise FormatError(f"{path}: payload size does not match header")
    arr = np.frombuffer(data, dtype="<c8", count=count, offset=off).reshape(grid.n_planes, ny, nx)
    return ImageVolume(grid, arr.astype(np.complex128), er, interface_z, (), n)


def write_pgm(path, plane_db: np.ndarray, clip_db: float = 40.0) -> dict:
    """16-bit binary PGM of a dB image; ``[-clip_db, 0]`` maps to ``[0, 65535]``.

    Writes ``<path>.txt`` with the scaling and returns it as a dict.
    """
    db = np.clip(np.nan_to_num(np.asarray(plane_db, float), neginf=-clip_db), -clip_db, 0.0)
    img = np.rint((db + clip_db) / clip_db * 65535).astype(">u2")
    # PGM rows run top to bottom; flip so +y is up
    img = img[::-1]
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(img.tobytes())
    meta = {"db_min": -clip_db, "db_max": 0.0, "maxval": 65535, "width": w, "height": h,
            "row_order": "y descending"}
    write_pgm_sidecar(str(path) + ".txt", meta)
    return meta


def write_pgm_sidecar(path, meta: dict) -> None:
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k} = {v}\n")


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise FormatError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[4], dtype=dtype, count=w * h).reshape(h, w)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)


def write_depth_profile_csv(path, profile) -> None:
    write_csv(path, ["z_mm", "amplitude_db"],
               [(f"{z * 1e3:.3f}", f"{a:.6f}") for z, a in zip(profile.z, profile.amplitude_db)])


def write_histogram_csv(path, counts, edges) -> None:
    centers = 0.5 * (np.asarray(edges[1:]) + np.asarray(edges[:-1]))
    write_csv(path, ["bin_center_db", "count"], [(f"{c:.4f}", int(n)) for c, n in zip(centers, counts)])


def write_targets_csv(path, rows) -> None:
    """``rows``: iterable of (id, x_m, y_m, z_m, amplitude_db)."""
    write_csv(path, ["id", "x_m", "y_m", "z_mm", "amplitude_db"],
               [(i, f"{x:.4f}", f"{y:.4f}", f"{z * 1e3:.1f}", f"{a:.3f}") for i, x, y, z, a in rows])


def write_detections_csv(path, detections, group_ids) -> None:
    write_csv(path, ["x_m", "y_m", "z_mm", "amplitude_db", "plane_index", "group_id"],
               [(f"{d.x:.4f}", f"{d.y:.4f}", f"{d.z * 1e3:.1f}", f"{d.amplitude_db:.3f}", d.plane_index, int(g))
                for d, g in zip(detections, group_ids)])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
