"""Little-endian binary tensor files.

Layout (no padding)::

    magic    4 bytes  b"RSQE"
    version  u32      1
    dtype    u8       1 = float32
    flags    u8       bit 0 set when labels follow the payload
    reserved u16      0
    ndim     u32
    dims     ndim x u64
    payload  prod(dims) x f32, row-major
    [count   u64
     labels  count x u32]
"""

import struct
from pathlib import Path

import numpy as np

from .exceptions import FormatError, ParameterError

MAGIC = b"RSQE"
VERSION = 1
DTYPE_F32 = 1
FLAG_LABELS = 0x01

_HEADER = struct.Struct("<4sIBBHI")


def encode_tensor(tensor, labels=None):
    """Serialize ``tensor`` (and optional ``labels``) to bytes."""
    arr = np.asarray(tensor)
    if not np.issubdtype(arr.dtype, np.number):
        raise ParameterError(f"tensor must be numeric, got {arr.dtype}")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("tensor contains non-finite values")
    flags = 0
    if labels is not None:
        lab = np.asarray(labels)
        if lab.ndim != 1:
            raise ParameterError("labels must be one-dimensional")
        if lab.size and (lab.min() < 0 or lab.max() > 0xFFFFFFFF):
            raise ParameterError("labels must fit in u32")
        flags |= FLAG_LABELS
    parts = [
        _HEADER.pack(MAGIC, VERSION, DTYPE_F32, flags, 0, arr.ndim),
        struct.pack(f"<{arr.ndim}Q", *arr.shape),
        arr.tobytes(order="C"),
    ]
    if labels is not None:
        parts.append(struct.pack("<Q", lab.size))
        parts.append(np.ascontiguousarray(lab, dtype="<u4").tobytes())
    return b"".join(parts)


def decode_tensor(buf):
    """Inverse of :func:`encode_tensor`; returns ``(array, labels_or_None)``."""
    buf = memoryview(bytes(buf))
    if len(buf) < 4 or bytes(buf[:4]) != MAGIC:
        raise FormatError(f"bad magic {bytes(buf[:4])!r}", 0)
    if len(buf) < _HEADER.size:
        raise FormatError("truncated header", len(buf))
    _, version, dtype, flags, reserved, ndim = _HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}", 8)
    if flags & ~FLAG_LABELS:
        raise FormatError(f"unknown flag bits {flags:#04x}", 9)
    if reserved != 0:
        raise FormatError("reserved field must be zero", 10)
    pos = _HEADER.size
    if len(buf) < pos + 8 * ndim:
        raise FormatError("truncated dimension list", len(buf))
    dims = struct.unpack_from(f"<{ndim}Q", buf, pos)
    pos += 8 * ndim
    count = 1
    for d in dims:
        count *= d
    nbytes = 4 * count
    if len(buf) < pos + nbytes:
        raise FormatError(
            f"truncated payload: expected {nbytes} bytes, found {len(buf) - pos}",
            len(buf),
        )
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=pos)
    data = data.astype(np.float32).reshape(dims)
    pos += nbytes
    labels = None
    if flags & FLAG_LABELS:
        if len(buf) < pos + 8:
            raise FormatError("truncated label count", len(buf))
        (nlab,) = struct.unpack_from("<Q", buf, pos)
        pos += 8
        if len(buf) < pos + 4 * nlab:
            raise FormatError("truncated labels", len(buf))
        labels = np.frombuffer(buf, dtype="<u4", count=nlab, offset=pos)
        labels = labels.astype(np.int64)
        pos += 4 * nlab
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes", pos)
    return data, labels


def write_tensor_file(path, tensor, labels=None):
    Path(path).write_bytes(encode_tensor(tensor, labels))


def read_tensor_file(path):
    return decode_tensor(Path(path).read_bytes())

