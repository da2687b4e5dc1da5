"""
Embedding extraction and the embedding file format.

File layout (little-endian): magic ``b"MREB"``, version u32, count u64,
dim u64, then ``count`` rows of float32. A sidecar CSV
``<file>.csv`` lists ``row,identity,camera,source_path`` per row.
"""

import csv
import struct
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from mros.data.loader import BatchLoader
from mros.data.records import ImageRecord
from mros.errors import DataError, FormatError
from mros.evaluation.metrics import EmbeddingSet
from mros.model.network import MROSNetwork
from mros.utils.logging import get_logger

logger = get_logger("mros.evaluation.embeddings")

MAGIC = b"MREB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
EMBED_BATCH = 64


def sidecar_path(path: Union[str, Path]) -> Path:
    return Path(str(path) + ".csv")


def extract_embeddings(
    model: MROSNetwork,
    loader: BatchLoader,
    records: Sequence[ImageRecord],
    batch_size: int = EMBED_BATCH,
) -> EmbeddingSet:
    """
    Test-time descriptors ``G`` for ``records``.

    Descriptors are rounded to single precision, the precision of the
    embedding file, so in-memory and on-disk evaluation agree.
    """
    if not records:
        raise DataError("cannot embed an empty split")
    rows = []
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        rows.append(model.embed(loader.load(chunk)))
    descriptors = np.concatenate(rows, axis=0).astype(np.float32).astype(np.float64)
    return EmbeddingSet(
        descriptors=descriptors,
        identities=[r.identity for r in records],
        cameras=[r.camera for r in records],
        paths=[r.path for r in records],
    )


def save_embeddings(path: Union[str, Path], embeddings: EmbeddingSet, fingerprint: Optional[str] = None) -> Path:
    """Write the binary file and its sidecar CSV."""
    path = Path(path)
    data = np.ascontiguousarray(embeddings.descriptors, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, data.shape[0], data.shape[1]))
        f.write(data.tobytes(order="C"))
    with open(sidecar_path(path), "w", newline="", encoding="utf-8") as f:
        if fingerprint:
            f.write(f"# fingerprint={fingerprint}\n")
        writer = csv.writer(f)
        writer.writerow(["row", "identity", "camera", "source_path"])
        for i in range(len(embeddings)):
            source = embeddings.paths[i] if embeddings.paths else ""
            writer.writerow([i, int(embeddings.identities[i]), int(embeddings.cameras[i]), source])
    logger.info(f"Wrote {len(embeddings)} x {embeddings.dim} embeddings to {path}")
    return path


def load_embeddings(path: Union[str, Path]) -> EmbeddingSet:
    """
    Read an embedding file and its sidecar.

    Raises:
        FormatError: bad magic/version, truncated rows or sidecar mismatch
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"embedding file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated embedding header")
    magic, version, count, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad embedding magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported embedding version {version}")
    expected = count * dim * 4
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise FormatError(f"{path}: expected {expected} bytes of rows, found {len(body)}")
    descriptors = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(count, dim)

    side = sidecar_path(path)
    if not side.exists():
        raise FormatError(f"missing sidecar {side}")
    with open(side, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    if len(rows) != count:
        raise FormatError(f"{side} lists {len(rows)} rows, embedding file has {count}")
    return EmbeddingSet(
        descriptors=descriptors,
        identities=[int(r["identity"]) for r in rows],
        cameras=[int(r["camera"]) for r in rows],
        paths=[r["source_path"] for r in rows],
    )
