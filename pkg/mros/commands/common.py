"""
Shared plumbing for the subcommands.
"""

import argparse
import os
from typing import Any, Dict

from mros.config import RunConfig, load_config
from mros.utils.logging import attach_file_handler


def resolve_config(args: argparse.Namespace, **extra: Any) -> RunConfig:
    """Config file values overridden by global flags, then by ``extra`` (flag wins)."""
    overrides: Dict[str, Any] = {
        "seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out", None),
    }
    overrides.update(extra)
    return load_config(getattr(args, "config", None), **overrides)


def mirror_log(out_dir: str, name: str = "run.log") -> None:
    attach_file_handler(os.path.join(out_dir, name))
