"""Binary field files ("HIF1").

Layout (all little-endian)::

    0-3    magic b"HIF1"
    4-7    u32 version (1)
    8-11   u32 n_x
    12-15  u32 n_y
    16-19  u32 payload kind: 0 scalar, 1 symmetric 2x2 (planes a11, a12, a22)
    20-    float64 values, row-major (y outer, x inner)
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .fields import Grid, MatrixField, ScalarField

MAGIC = b"HIF1"
VERSION = 1
HEADER = struct.Struct("<4sIIII")
KIND_SCALAR = 0
KIND_MATRIX = 1


class HIFError(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


def encode(field: ScalarField | MatrixField) -> bytes:
    g = field.grid
    if isinstance(field, ScalarField):
        kind, planes = KIND_SCALAR, [field.values]
    elif isinstance(field, MatrixField):
        kind, planes = KIND_MATRIX, [field.a11, field.a12, field.a22]
    else:
        raise TypeError(f"cannot encode {type(field).__name__}")
    payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in planes)
    return HEADER.pack(MAGIC, VERSION, g.nx, g.ny, kind) + payload


def decode(data: bytes) -> ScalarField | MatrixField:
    if len(data) < HEADER.size:
        raise HIFError("truncated payload", "file shorter than header")
    magic, version, nx, ny, kind = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise HIFError("bad magic", repr(magic))
    if version != VERSION:
        raise HIFError("version mismatch", f"expected {VERSION}, got {version}")
    if kind not in (KIND_SCALAR, KIND_MATRIX):
        raise HIFError("bad payload kind", str(kind))
    n_planes = 1 if kind == KIND_SCALAR else 3
    expected = HEADER.size + 8 * nx * ny * n_planes
    if len(data) != expected:
        raise HIFError("truncated payload", f"expected {expected} bytes, got {len(data)}")
    vals = np.frombuffer(data, dtype="<f8", offset=HEADER.size).astype(np.float64)
    if not np.all(np.isfinite(vals)):
        raise HIFError("non-finite values")
    try:
        grid = Grid(nx, ny)
    except ValueError as exc:
        raise HIFError("bad dimensions", str(exc)) from None
    planes = vals.reshape(n_planes, ny, nx)
    if kind == KIND_SCALAR:
        return ScalarField(grid, planes[0])
    return MatrixField(grid, planes[0], planes[1], planes[2])


def write_field(field: ScalarField | MatrixField, path) -> None:
    data = encode(field)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def read_field(path) -> ScalarField | MatrixField:
    with open(path, "rb") as fh:
        return decode(fh.read())
