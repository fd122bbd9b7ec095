"""Binary snapshot files for velocity states.

Layout: header ``magic "EFRS", version u32, N u32, components u32, time f64,
seed u64``, then one row-major little-endian float64 block per component
(u first, then v).  Round trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import IOFailure
from .grid import StaggeredGrid, VelocityField

SNAPSHOT_MAGIC = b"EFRS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdQ")


@dataclass
class Snapshot:
    field: VelocityField
    time: float
    seed: int


def write_snapshot(path, field: VelocityField, time: float, seed: int) -> None:
    n = field.grid.n
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, n, 2,
                                  float(time), int(seed)))
            fh.write(np.ascontiguousarray(field.u, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(field.v, dtype="<f8").tobytes())
    except OSError as exc:
        raise IOFailure(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path, grid: StaggeredGrid | None = None) -> Snapshot:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read snapshot {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise IOFailure(f"snapshot {path} truncated")
    magic, version, n, ncomp, time, seed = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise IOFailure(f"{path} is not a snapshot file (magic {magic!r})")
    if version != SNAPSHOT_VERSION:
        raise IOFailure(f"unsupported snapshot version {version}")
    expected = _HEADER.size + ncomp * n * n * 8
    if len(raw) != expected:
        raise IOFailure(f"snapshot {path} has {len(raw)} bytes, expected {expected}")
    if grid is None:
        grid = StaggeredGrid(n)
    elif grid.n != n:
        raise IOFailure(f"snapshot is {n}x{n}, requested grid is {grid.n}x{grid.n}")
    u = np.frombuffer(raw, dtype="<f8", count=n * n, offset=_HEADER.size)
    v = np.frombuffer(raw, dtype="<f8", count=n * n, offset=_HEADER.size + n * n * 8)
    field = VelocityField(u.reshape(n, n).copy(), v.reshape(n, n).copy(), grid)
    return Snapshot(field=field, time=time, seed=seed)
