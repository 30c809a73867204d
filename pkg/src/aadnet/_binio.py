"""Tagged-array binary container shared by the model and baseline checkpoints.

Layout (little-endian)::

    4s   magic
    u32  format version
    u32  number of config values K, then K x f64
    u32  number of arrays, then per array:
         u16 id, u8 rank, rank x u32 dims, prod(dims) x f64

A file must end exactly after the last array payload.
"""

from __future__ import annotations

import struct

import numpy as np

from .exceptions import FormatError

_HEAD = struct.Struct("<4sII")
_U32 = struct.Struct("<I")
_TAG = struct.Struct("<HB")
MAX_RANK = 8


def pack(magic, version, config_values, arrays):
    """``arrays`` is a sequence of ``(id, ndarray)``; values are stored as float64."""
    config_values = np.asarray(config_values, dtype="<f8")
    parts = [_HEAD.pack(magic, version, config_values.size), config_values.tobytes(),
             _U32.pack(len(arrays))]
    for tag, arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        if arr.ndim > MAX_RANK:
            raise FormatError(f"array {tag} has rank {arr.ndim} > {MAX_RANK}")
        parts.append(_TAG.pack(tag, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def _need(buf, pos, n, what):
    if pos + n > len(buf):
        raise FormatError(f"{what} truncated: need {pos + n} bytes, data has {len(buf)}", pos)


def unpack(buf, magic, version):
    """Inverse of :func:`pack`; returns ``(config_values, [(id, array), ...])``."""
    buf = memoryview(buf)
    _need(buf, 0, _HEAD.size, "header")
    got_magic, got_version, k = _HEAD.unpack_from(buf, 0)
    if got_magic != magic:
        raise FormatError(f"bad magic {bytes(got_magic)!r}, expected {magic!r}", 0)
    if got_version != version:
        raise FormatError(f"unsupported version {got_version}", 4)
    pos = _HEAD.size
    _need(buf, pos, 8 * k, "config block")
    config = np.frombuffer(buf, dtype="<f8", count=k, offset=pos).astype(np.float64)
    pos += 8 * k
    _need(buf, pos, 4, "array count")
    (count,) = _U32.unpack_from(buf, pos)
    pos += 4
    arrays = []
    for _ in range(count):
        _need(buf, pos, _TAG.size, "array tag")
        tag, rank = _TAG.unpack_from(buf, pos)
        if rank > MAX_RANK:
            raise FormatError(f"array {tag} declares rank {rank} > {MAX_RANK}", pos + 2)
        pos += _TAG.size
        _need(buf, pos, 4 * rank, "array dims")
        dims = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        _need(buf, pos, 8 * size, f"array {tag} payload")
        arr = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(dims)
        arrays.append((tag, arr.astype(np.float64)))
        pos += 8 * size
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after last array", pos)
    return config, arrays
