"""
Checkpoint container.

Layout (little-endian): magic ``b"MRCK"``, version u32, manifest length
u64, UTF-8 JSON manifest, then tensor records in the binary tensor format.
The manifest maps every tensor name to its byte offset from the start of
the tensor section and carries the scalar state (epoch, optimizer step,
rng state, config, fingerprint).
"""

import io
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from mros.autodiff.serialization import read_tensor_stream, write_tensor_stream
from mros.config import RunConfig, build_config
from mros.errors import FormatError
from mros.losses import ClassCenters
from mros.training.optimizer import OptimizerState

MAGIC = b"MRCK"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")

CHECKPOINT_NAME = "checkpoint.mros"
_MANIFEST_KEYS = ("fingerprint", "config", "num_classes", "epoch", "optimizer", "center_update_rates", "rng_state", "tensors")


@dataclass
class Checkpoint:
    """Everything needed to continue a run bit-exactly."""

    config: RunConfig
    num_classes: int
    epoch: int
    model_state: Dict[str, np.ndarray]
    centers: List[ClassCenters]
    optimizer: OptimizerState
    rng_state: Dict[str, Any]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()


def _tensors(ckpt: Checkpoint) -> Dict[str, np.ndarray]:
    tensors = {f"model/{name}": array for name, array in ckpt.model_state.items()}
    for i, centers in enumerate(ckpt.centers):
        tensors[f"centers/{i}"] = centers.c
    for name in sorted(ckpt.optimizer.m):
        tensors[f"adam.m/{name}"] = ckpt.optimizer.m[name]
        tensors[f"adam.v/{name}"] = ckpt.optimizer.v[name]
    return tensors


def save_checkpoint(path: Union[str, Path], ckpt: Checkpoint) -> str:
    """Write ``ckpt`` atomically (temp file + rename)."""
    body = io.BytesIO()
    offsets: Dict[str, int] = {}
    for name, array in _tensors(ckpt).items():
        offsets[name] = body.tell()
        write_tensor_stream(body, array)

    opt = ckpt.optimizer
    manifest = {
        "fingerprint": ckpt.fingerprint,
        "config": ckpt.config.model_dump(mode="json"),
        "num_classes": ckpt.num_classes,
        "epoch": ckpt.epoch,
        "optimizer": {
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
            "weight_decay": opt.weight_decay,
            "step": opt.step,
        },
        "center_update_rates": [c.update_rate for c in ckpt.centers],
        "rng_state": ckpt.rng_state,
        "metadata": ckpt.metadata,
        "tensors": offsets,
    }
    encoded = json.dumps(manifest, sort_keys=True).encode("utf-8")

    path = str(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(encoded)))
        f.write(encoded)
        f.write(body.getvalue())
    os.replace(tmp, path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Raises:
        FormatError: on a bad header, manifest or tensor record
    """
    if not os.path.exists(path):
        raise FormatError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated checkpoint header")
    magic, version, manifest_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    start = _HEADER.size + manifest_len
    try:
        manifest = json.loads(raw[_HEADER.size:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: unreadable manifest: {e}") from e
    missing = [key for key in _MANIFEST_KEYS if key not in manifest]
    if missing:
        raise FormatError(f"{path}: manifest lacks {missing}")

    tensors: Dict[str, np.ndarray] = {}
    for name, offset in manifest["tensors"].items():
        tensors[name] = read_tensor_stream(io.BytesIO(raw[start + offset:]))

    config = build_config(manifest["config"])
    if config.fingerprint() != manifest["fingerprint"]:
        raise FormatError(f"{path}: config does not match stored fingerprint {manifest['fingerprint']}")

    opt_fields = manifest["optimizer"]
    optimizer = OptimizerState(**opt_fields)
    for name, array in tensors.items():
        if name.startswith("adam.m/"):
            optimizer.m[name[len("adam.m/"):]] = array.copy()
        elif name.startswith("adam.v/"):
            optimizer.v[name[len("adam.v/"):]] = array.copy()

    rates = manifest["center_update_rates"]
    centers = [ClassCenters(tensors[f"centers/{i}"].copy(), rate) for i, rate in enumerate(rates)]
    model_state = {name[len("model/"):]: array for name, array in tensors.items() if name.startswith("model/")}

    return Checkpoint(
        config=config,
        num_classes=int(manifest["num_classes"]),
        epoch=int(manifest["epoch"]),
        model_state=model_state,
        centers=centers,
        optimizer=optimizer,
        rng_state=manifest["rng_state"],
        metadata=manifest.get("metadata", {}),
    )
