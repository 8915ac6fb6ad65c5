"""VGPT tensor files and the small TSV indexes that accompany them.

Layout (little-endian): magic ``b"VGPT"``, u32 version (1), u32 ndim,
``ndim`` u32 dims, then row-major float32 data.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"VGPT"
VERSION = 1


class FormatError(ValueError):
    pass


def encode_tensor(arr) -> bytes:
    a = np.array(arr, dtype="<f4", order="C")
    head = MAGIC + struct.pack("<II", VERSION, a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return head + a.tobytes(order="C")


def decode_tensor(buf: bytes) -> np.ndarray:
    if buf[:4] != MAGIC:
        raise FormatError("not a VGPT tensor (bad magic)")
    version, ndim = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported VGPT version {version}")
    dims = struct.unpack_from(f"<{ndim}I", buf, 12)
    off = 12 + 4 * ndim
    count = int(np.prod(dims)) if ndim else 1
    if len(buf) - off != 4 * count:
        raise FormatError(f"payload has {len(buf) - off} bytes, expected {4 * count}")
    return np.frombuffer(buf, dtype="<f4", count=count, offset=off).reshape(dims).astype(np.float64)


def write_tensor(path, arr):
    with open(path, "wb") as f:
        f.write(encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_tensor(f.read())


def as_stored(arr) -> np.ndarray:
    """Values exactly as they come back after a write/read round trip."""
    return np.asarray(arr, dtype=np.float32).astype(np.float64)


def read_index(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n").split("\t") for line in f if line.strip()]
