import argparse
import json
import sys
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables before importing modules that read them
load_dotenv()

from mros.commands import ablate, embed, evaluate, synth, train
from mros.errors import MROSError
from mros.utils.logging import get_logger

logger = get_logger("mros.main")

COMMANDS = {
    "synth": synth.run,
    "train": train.run,
    "embed": embed.run,
    "eval": evaluate.run,
    "ablate": ablate.run,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="flat key-value YAML config file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--force", action="store_true", help="write into a non-empty output directory")

    parser = argparse.ArgumentParser(prog="mros", description="Multi-resolution overlapping-stripe person re-identification")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="render a synthetic identity dataset")

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--setting", default=None, help="ablation setting: I, II, III or IV")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")

    p = sub.add_parser("embed", parents=[common], help="export descriptors of a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["all", "query", "gallery", "train"], default="all")
    p.add_argument("--data-root", dest="data_root", default=None)

    p = sub.add_parser("eval", parents=[common], help="evaluate query against gallery embeddings")
    p.add_argument("--query", required=True, help="query embedding file")
    p.add_argument("--gallery", required=True, help="gallery embedding file")
    p.add_argument("--metric", choices=["l2", "cosine"], default=None)
    p.add_argument("--no-protocol-filter", dest="no_protocol_filter", action="store_true")

    p = sub.add_parser("ablate", parents=[common], help="train Settings I-IV and tabulate them")
    p.add_argument("--epochs", type=int, default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, otherwise the exit code of the raised error
        (2 usage/config, 3 data, 4 numeric divergence)
    """
    args = build_parser().parse_args(argv)
    try:
        summary = COMMANDS[args.command](args)
    except MROSError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code

    print(json.dumps(summary, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
