"""TNS1 tensor files: float32 little-endian with rank/dims header."""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"TNS1"
DTYPE_F32 = 1


class TensorFormatError(ValueError):
    pass


def tensor_to_bytes(array) -> bytes:
    array = np.asarray(array, dtype="<f4")
    head = MAGIC + struct.pack("<BB", DTYPE_F32, array.ndim)
    dims = struct.pack(f"<{array.ndim}I", *array.shape)
    return head + dims + array.tobytes()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    if data[:4] != MAGIC:
        raise TensorFormatError("bad magic")
    dtype, rank = struct.unpack_from("<BB", data, 4)
    if dtype != DTYPE_F32:
        raise TensorFormatError("unsupported dtype")
    dims = struct.unpack_from(f"<{rank}I", data, 6)
    off = 6 + 4 * rank
    n = int(np.prod(dims)) if rank else 1
    raw = data[off : off + 4 * n]
    if len(raw) != 4 * n:
        raise TensorFormatError("truncated tensor data")
    return np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)


def write_tensor(path, array):
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(array))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())
