"""Binary weight files.

Layout (all little-endian):

    magic   5 bytes  b"CEHRW"
    version u32      currently 1
    count   u32      number of named tensors
    then per tensor:
        name_len u16, name utf-8 bytes,
        rank u8, extents u32 * rank,
        payload float32, C order

Payloads are stored float32 regardless of in-memory dtype; loading returns
plain float32 numpy arrays in file order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import ChronobertError
from .tensor import Tensor

MAGIC = b"CEHRW"
VERSION = 1


class WeightFormatError(ChronobertError):
    pass


def save_weights(path, tensors: Mapping[str, "Tensor | np.ndarray"]) -> None:
    path = Path(path)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(tensors))
    for name, value in tensors.items():
        arr = np.asarray(value.data if isinstance(value, Tensor) else value, dtype=np.float32)
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise WeightFormatError(f"tensor name too long: {name[:32]}...")
        if arr.ndim > 0xFF:
            raise WeightFormatError(f"tensor rank {arr.ndim} exceeds format limit")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += np.ascontiguousarray(arr).tobytes()
    path.write_bytes(bytes(blob))


def load_weights(path) -> dict[str, np.ndarray]:
    path = Path(path)
    blob = path.read_bytes()
    view = memoryview(blob)
    if blob[:5] != MAGIC:
        raise WeightFormatError(f"{path}: bad magic {blob[:5]!r}")
    version, count = struct.unpack_from("<II", blob, 5)
    if version != VERSION:
        raise WeightFormatError(f"{path}: unsupported version {version}")
    offset = 13
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = bytes(view[offset:offset + name_len]).decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", blob, offset)
            offset += 4 * rank
            n_items = int(np.prod(shape, dtype=np.int64)) if rank else 1
            n_bytes = 4 * n_items
            if offset + n_bytes > len(blob):
                raise WeightFormatError(f"{path}: truncated payload for {name!r}")
            arr = np.frombuffer(view[offset:offset + n_bytes], dtype="<f4").reshape(shape).copy()
            offset += n_bytes
            if name in out:
                raise WeightFormatError(f"{path}: duplicate tensor name {name!r}")
            out[name] = arr
    except struct.error as exc:
        raise WeightFormatError(f"{path}: truncated header ({exc})") from None
    if offset != len(blob):
        raise WeightFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    return out
