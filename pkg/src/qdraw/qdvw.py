"""QDVW binary tensor container.

Layout, all integers unsigned 32-bit little-endian:
magic "QDVW", format version, tensor count, then per tensor: name length,
UTF-8 name bytes, rank, one dim per axis, raw IEEE-754 float32
little-endian values in row-major order. Tensors are written sorted by
name so equal contents give equal bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ValidationError

MAGIC = b"QDVW"
VERSION = 1


def save_tensors(path, tensors: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f4", copy=False).tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ValidationError(f"weight file truncated while reading {what}")
    return buf


def load_tensors(path) -> dict:
    tensors = {}
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise ValidationError("bad magic: not a QDVW weight file")
        version, count = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if version != VERSION:
            raise ValidationError(f"unsupported QDVW version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "name length"))
            name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, f"rank of {name}"))
            shape = struct.unpack(
                f"<{rank}I", _read_exact(fh, 4 * rank, f"dims of {name}")
            )
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            raw = _read_exact(fh, 4 * size, f"values of {name}")
            tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return tensors
