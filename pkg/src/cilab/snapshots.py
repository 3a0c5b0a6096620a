"""Binary field snapshots and stage checkpoint directories.

Snapshot layout: magic "EULR", format version u32, grid n u32, component
count u32, then each component in row-major x1-fastest order as little-endian
64-bit floats.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import GridSpec, ScalarField, TensorField, VectorField

MAGIC = b"EULR"
FORMAT_VERSION = 1
_KIND_BY_NCOMP = {1: ScalarField, 3: VectorField, 6: TensorField}


def write_snapshot(path, field):
    comps = field.data if field.data.ndim == 4 else field.data[None]
    n = field.grid.n
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, n, comps.shape[0]))
        for comp in comps:
            fh.write(np.ascontiguousarray(comp.ravel(order="F"), dtype="<f8").tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        version, n, ncomp = struct.unpack("<III", fh.read(12))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        if ncomp not in _KIND_BY_NCOMP:
            raise ValueError(f"{path}: unsupported component count {ncomp}")
        grid = GridSpec(n)
        comps = np.empty((ncomp, n, n, n))
        for c in range(ncomp):
            raw = fh.read(8 * n ** 3)
            if len(raw) != 8 * n ** 3:
                raise ValueError(f"{path}: truncated snapshot")
            comps[c] = np.frombuffer(raw, dtype="<f8").reshape((n, n, n), order="F")
    cls = _KIND_BY_NCOMP[ncomp]
    data = comps[0] if ncomp == 1 else comps
    return cls(grid, data)


def write_manifest(path, payload: dict):
    # allow_nan=False keeps the manifests valid for strict JSON parsers
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
