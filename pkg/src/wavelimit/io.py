"""
CSV writers and the binary snapshot format.

Binary snapshot layout (all integers and floats little-endian)::

    offset  size  field
    0       8     magic b"WLSNAP\\0\\0"
    8       4     format version (uint32, currently 1)
    12      16    grid hash (ASCII hex, 16 chars)
    28      8     eps (float64; 0 for parabolic or lifted sets)
    36      8     dt (float64)
    44      8     number of rows S (uint64)
    52      8     row length N (uint64)
    60      8     components per row C (uint64; 1 = u only, 2 = u then v)
    68      ...   S rows of C*N float64 values, row-major

CSV floats are written with ``repr`` so output is byte-stable across runs.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .grid import Grid

MAGIC = b"WLSNAP\0\0"
VERSION = 1
_HEADER = struct.Struct("<8sI16sddQQQ")


def _fmt(x) -> str:
    return repr(float(x))


def field_csv(u, grid: Grid, name: str = "value") -> str:
    """``node, x0[, x1, ...], value`` per interior node."""
    u = np.asarray(u, float)
    if u.shape != (grid.size,):
        raise ValueError(f"field has shape {u.shape}, expected ({grid.size},)")
    coords = grid.coordinates
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node"] + [f"x{i}" for i in range(grid.dimension)] + [name])
    for i in range(grid.size):
        w.writerow([i] + [_fmt(c) for c in coords[i]] + [_fmt(u[i])])
    return buf.getvalue()


def table_csv(columns: dict) -> str:
    """Columns of equal length written in insertion order."""
    names = list(columns)
    cols = [np.asarray(columns[n]).ravel() for n in names]
    if len({c.size for c in cols}) > 1:
        raise ValueError("columns have different lengths")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def trajectory_csv(traj, norms: Optional[dict] = None) -> str:
    """One row per snapshot: ``t`` then either the requested norms or the u-values.

    ``norms`` maps column names to callables ``(u, v) -> scalar``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if norms:
        w.writerow(["t"] + list(norms))
        for i, t in enumerate(traj.times):
            v = None if traj.v is None else traj.v[i]
            w.writerow([_fmt(t)] + [_fmt(fn(traj.u[i], v)) for fn in norms.values()])
    else:
        N = traj.u.shape[1]
        w.writerow(["t"] + [f"u{j}" for j in range(N)])
        for i, t in enumerate(traj.times):
            w.writerow([_fmt(t)] + [_fmt(x) for x in np.ravel(traj.u[i])])
    return buf.getvalue()


@dataclass
class Snapshots:
    grid_hash: str
    eps: float
    dt: float
    u: np.ndarray  # (S, N)
    v: Optional[np.ndarray]  # (S, N) or None


def write_snapshots(path, grid_hash: str, eps: float, dt: float, u, v=None) -> None:
    u = np.ascontiguousarray(u, dtype="<f8")
    if u.ndim != 2:
        raise ValueError(f"snapshot rows must be 2-D (S, N), got {u.shape}")
    comps = 1
    body = u
    if v is not None:
        v = np.ascontiguousarray(v, dtype="<f8")
        if v.shape != u.shape:
            raise ValueError(f"u and v shapes differ: {u.shape} vs {v.shape}")
        body = np.concatenate([u, v], axis=1)
        comps = 2
    if len(grid_hash) != 16:
        raise ValueError(f"grid hash must be 16 characters, got {grid_hash!r}")
    S, N = u.shape
    header = _HEADER.pack(MAGIC, VERSION, grid_hash.encode("ascii"), float(eps), float(dt), S, N, comps)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes(order="C"))


def read_snapshots(path) -> Snapshots:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ConfigurationError(f"{path}: file too short for a snapshot header")
    magic, version, ghash, eps, dt, S, N, comps = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ConfigurationError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ConfigurationError(f"{path}: unsupported snapshot version {version}")
    expected = _HEADER.size + 8 * S * N * comps
    if len(data) != expected:
        raise ConfigurationError(f"{path}: expected {expected} bytes, found {len(data)}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(S, comps * N)
    u = body[:, :N].astype(float)
    v = body[:, N:].astype(float) if comps == 2 else None
    return Snapshots(ghash.decode("ascii"), eps, dt, u, v)
