"""
``mros embed``: export test-time descriptors of a dataset split.
"""

import argparse
import os
from typing import Any, Dict, Optional, Sequence

from mros.data import BatchLoader, open_dataset
from mros.errors import DataError
from mros.evaluation import extract_embeddings, save_embeddings
from mros.tools.artifacts import prepare_out_dir
from mros.training import load_trained
from mros.utils.logging import get_logger

logger = get_logger("mros.commands.embed")

SPLITS = ("query", "gallery", "train")


def cmd_embed(
    checkpoint: str,
    out_dir: str,
    splits: Sequence[str] = ("query", "gallery"),
    data_root: Optional[str] = None,
    force: bool = False,
) -> Dict[str, Any]:
    """
    Embed ``splits`` with the model stored in ``checkpoint``.

    Args:
        checkpoint: Trained checkpoint; its config selects the dataset
        out_dir: Receives ``<split>.emb`` and ``<split>.emb.csv``
        splits: Split names to export
        data_root: Dataset location overriding the checkpoint's

    Returns:
        Output file, row count and descriptor dimension per split
    """
    state = load_trained(checkpoint)
    config = state.config
    if data_root:
        config = config.with_overrides(data_root=data_root)
    dataset, images = open_dataset(config)
    loader = BatchLoader(config, images=images)
    out = prepare_out_dir(out_dir, force=force)
    fingerprint = state.config.fingerprint()

    written: Dict[str, Any] = {}
    for name in splits:
        records = dataset.split(name)
        if not records:
            raise DataError(f"split {name!r} is empty")
        embeddings = extract_embeddings(state.model, loader, records)
        path = save_embeddings(os.path.join(out, f"{name}.emb"), embeddings, fingerprint)
        written[name] = {"path": str(path), "rows": len(embeddings), "dim": embeddings.dim}
    logger.info(f"Descriptor dimension {state.model.descriptor_dim}")
    return {"checkpoint": checkpoint, "fingerprint": fingerprint, "splits": written}


def run(args: argparse.Namespace) -> Dict[str, Any]:
    splits = SPLITS[:2] if args.split == "all" else (args.split,)
    out_dir = args.out or os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)), "embeddings")
    return cmd_embed(args.checkpoint, out_dir, splits=splits, data_root=args.data_root, force=args.force)
