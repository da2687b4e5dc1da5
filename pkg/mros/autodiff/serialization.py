"""
Little-endian binary tensor files.

Layout: magic ``b"MROS"``, format version u32, rank u32, extents u64[rank],
then float64 values in row-major order.
"""

import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from mros.autodiff.tensor import Tensor
from mros.errors import FormatError

MAGIC = b"MROS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sII")

PathLike = Union[str, Path]


def write_tensor_stream(stream: BinaryIO, tensor: Union[Tensor, np.ndarray]) -> int:
    """Write one tensor record; returns the number of bytes written."""
    data = tensor.data if isinstance(tensor, Tensor) else np.asarray(tensor)
    payload = np.ascontiguousarray(data, dtype="<f8")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, payload.ndim)
    extents = struct.pack(f"<{payload.ndim}Q", *payload.shape)
    body = payload.tobytes(order="C")
    stream.write(header)
    stream.write(extents)
    stream.write(body)
    return len(header) + len(extents) + len(body)


def read_tensor_stream(stream: BinaryIO) -> np.ndarray:
    raw = stream.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise FormatError("truncated tensor header")
    magic, version, rank = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported tensor format version {version}")
    raw = stream.read(8 * rank)
    if len(raw) != 8 * rank:
        raise FormatError("truncated tensor extents")
    shape = struct.unpack(f"<{rank}Q", raw)
    count = int(np.prod(shape)) if rank else 1
    raw = stream.read(8 * count)
    if len(raw) != 8 * count:
        raise FormatError(f"truncated tensor body: expected {count} values")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def save_tensor(path: PathLike, tensor: Union[Tensor, np.ndarray]) -> None:
    with open(path, "wb") as f:
        write_tensor_stream(f, tensor)


def load_tensor(path: PathLike) -> Tensor:
    with open(path, "rb") as f:
        return Tensor(read_tensor_stream(f))
