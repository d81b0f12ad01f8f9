"""Tiny binary tensor container used for every array artifact in this repo.

Layout: magic ``PRT1``, one dtype byte (0 = float32, 1 = complex64 with
interleaved real/imag), one rank byte, ``rank`` little-endian uint32 dims,
then the raw little-endian payload in row-major order.

Boolean masks are stored as float32 0/1 vectors by convention.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PRT1"

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<c8")}
_CODES_BY_KIND = {"f": 0, "c": 1}


class TensorFormatError(ValueError):
    """Raised when a file does not parse as a PRT1 container."""


def save_tensor(path, array) -> None:
    """Write ``array`` to ``path`` as a PRT1 container.

    Real input is stored as float32, complex input as complex64. Boolean
    arrays are converted to float32 0/1.
    """
    arr = np.asarray(array)
    if arr.dtype.kind == "b":
        arr = arr.astype("<f4")
    if arr.dtype.kind in ("i", "u"):
        arr = arr.astype("<f4")
    if arr.dtype.kind not in _CODES_BY_KIND:
        raise TensorFormatError(f"unsupported dtype {arr.dtype}")
    code = _CODES_BY_KIND[arr.dtype.kind]
    arr = np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code])
    if arr.ndim > 255:
        raise TensorFormatError("rank exceeds container limit")
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def load_tensor(path) -> np.ndarray:
    """Read a PRT1 container; returns float32 or complex64 ndarray."""
    raw = Path(path).read_bytes()
    if len(raw) < 6 or raw[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic")
    code, rank = struct.unpack_from("<BB", raw, 4)
    if code not in _DTYPE_CODES:
        raise TensorFormatError(f"{path}: unknown dtype code {code}")
    dims = struct.unpack_from(f"<{rank}I", raw, 6)
    offset = 6 + 4 * rank
    dtype = _DTYPE_CODES[code]
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = offset + count * dtype.itemsize
    if len(raw) != expected:
        raise TensorFormatError(
            f"{path}: payload size {len(raw) - offset}, expected {expected - offset}"
        )
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    return data.reshape(dims).copy()
