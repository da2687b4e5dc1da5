"""
``mros synth``: render a synthetic identity dataset to disk.
"""

import argparse
from typing import Any, Dict

from mros.commands.common import resolve_config
from mros.config import RunConfig
from mros.data import generate_synthetic, synthetic_spec
from mros.data.synthetic import content_hash
from mros.tools.artifacts import prepare_out_dir
from mros.utils.logging import RunLogger, get_logger

logger = get_logger("mros.commands.synth")


def cmd_synth(config: RunConfig, out_dir: str, force: bool = False, run_logger: RunLogger = None) -> Dict[str, Any]:
    """
    Write the dataset (PNG images, manifest, identity map) to ``out_dir``.

    Returns:
        Split counts and the content hash of everything written
    """
    root = prepare_out_dir(out_dir, force=force)
    fingerprint = config.fingerprint()
    dataset = generate_synthetic(synthetic_spec(config), out_dir=root, K=config.K, fingerprint=fingerprint)
    digest = content_hash(root)
    summary = {"out_dir": root, "counts": dataset.split.counts(), "content_hash": digest, "fingerprint": fingerprint}
    logger.info(f"Synthetic dataset {digest[:16]} at {root}: {summary['counts']}")
    if run_logger:
        run_logger.log_event("synth", "synth", summary)
    return summary


def run(args: argparse.Namespace) -> Dict[str, Any]:
    config = resolve_config(args)
    # --out names the dataset directory here; otherwise data_root is used
    out_dir = args.out or config.data_root
    return cmd_synth(config, out_dir, force=args.force, run_logger=RunLogger())
