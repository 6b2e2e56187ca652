"""VTNS binary tensor files.

Layout: ``b"VTNS"``, one version byte, one rank byte, ``rank`` little-endian
u64 extents, then the row-major payload as little-endian f64.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from vacgan.autodiff.tensor import Tensor
from vacgan.errors import BadFormat

MAGIC = b"VTNS"
VERSION = 1


def dumps(tensor: Tensor) -> bytes:
    shape = tensor.shape
    header = MAGIC + struct.pack("<BB", VERSION, len(shape)) + struct.pack(f"<{len(shape)}Q", *shape)
    return header + np.ascontiguousarray(tensor.data, dtype="<f8").tobytes()


def loads(blob: bytes) -> Tensor:
    if len(blob) < 6 or blob[:4] != MAGIC:
        raise BadFormat("not a VTNS tensor file")
    version, rank = struct.unpack_from("<BB", blob, 4)
    if version != VERSION:
        raise BadFormat(f"unsupported VTNS version {version}")
    offset = 6 + 8 * rank
    if len(blob) < offset:
        raise BadFormat("truncated VTNS header")
    shape = struct.unpack_from(f"<{rank}Q", blob, 6)
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    if len(blob) != offset + 8 * count:
        raise BadFormat(f"VTNS payload has {len(blob) - offset} bytes, expected {8 * count}")
    data = np.frombuffer(blob, dtype="<f8", offset=offset, count=count).astype(np.float64)
    return Tensor(data.reshape(shape))


def save_tensor(tensor: Tensor, path) -> None:
    Path(path).write_bytes(dumps(tensor))


def load_tensor(path) -> Tensor:
    return loads(Path(path).read_bytes())
