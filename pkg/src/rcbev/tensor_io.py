"""Binary tensor files.

Layout (all little-endian)::

    offset  size      field
    0       4         magic  b"RCBT"
    4       1         format version (1)
    5       1         dtype code (see DTYPE_CODES)
    6       1         rank
    7       1         reserved, zero
    8       8*rank    dims as uint64
    ...               row-major payload
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"RCBT"
VERSION = 1
DTYPE_CODES = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("<i4"),
    4: np.dtype("<i8"),
    5: np.dtype("u1"),
}
_CODE_OF = {dt: code for code, dt in DTYPE_CODES.items()}


class TensorFormatError(ValueError):
    pass


def encode_tensor(array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8)
    dtype = arr.dtype.newbyteorder("<") if arr.dtype.itemsize > 1 else arr.dtype
    if dtype not in _CODE_OF:
        raise TensorFormatError(f"unsupported dtype {arr.dtype}")
    if arr.ndim > 255:
        raise TensorFormatError("rank too large")
    header = MAGIC + struct.pack("<BBBB", VERSION, _CODE_OF[dtype], arr.ndim, 0)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=dtype).tobytes(order="C")


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < 8 or data[:4] != MAGIC:
        raise TensorFormatError("bad magic")
    version, code, rank, _ = struct.unpack_from("<BBBB", data, 4)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if code not in DTYPE_CODES:
        raise TensorFormatError(f"unknown dtype code {code}")
    dims_end = 8 + 8 * rank
    if len(data) < dims_end:
        raise TensorFormatError("truncated header")
    shape = struct.unpack_from(f"<{rank}Q", data, 8)
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = data[dims_end:]
    if len(payload) != expected:
        raise TensorFormatError(f"payload is {len(payload)} bytes, header implies {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tensor(path, array: np.ndarray) -> None:
    atomic_write_bytes(path, encode_tensor(array))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
