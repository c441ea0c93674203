"""Binary n-dimensional float64 array files.

Layout (all integers little-endian)::

    b"SMMA"            4 bytes magic
    version   u32      currently 1
    ndim      u32
    dims      ndim x u64
    payload   prod(dims) x f64, little-endian, column-major

A grouped data set stores its group axis last.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import FormatError

MAGIC = b"SMMA"
VERSION = 1
_HEAD = struct.Struct("<4sII")


def to_bytes(array) -> bytes:
    a = np.asarray(array, dtype="<f8")
    head = _HEAD.pack(MAGIC, VERSION, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return head + a.tobytes(order="F")


def from_bytes(buf: bytes) -> np.ndarray:
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}")
    if len(buf) < _HEAD.size:
        raise FormatError(f"file too short for a header ({len(buf)} bytes)")
    _, version, ndim = _HEAD.unpack_from(buf, 0)
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    off = _HEAD.size + 8 * ndim
    if len(buf) < off:
        raise FormatError("file truncated inside the dimension list")
    dims = struct.unpack_from(f"<{ndim}Q", buf, _HEAD.size)
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    if len(buf) - off != 8 * count:
        raise FormatError(f"payload has {len(buf) - off} bytes, dims {dims} need {8 * count}")
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    return data.reshape(dims, order="F").astype(float)


def write_array(path, array) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(array))


def read_array(path) -> np.ndarray:
    with open(os.fspath(path), "rb") as fh:
        return from_bytes(fh.read())
