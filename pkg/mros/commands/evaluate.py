"""
``mros eval``: score query embeddings against gallery embeddings.
"""

import argparse
from typing import Any, Dict

from mros.commands.common import resolve_config
from mros.config import RunConfig
from mros.errors import DimensionError
from mros.evaluation import evaluate, format_summary, load_embeddings, write_report
from mros.tools.artifacts import prepare_out_dir, save_run_summary
from mros.utils.logging import RunLogger, get_logger

logger = get_logger("mros.commands.eval")


def cmd_eval(
    config: RunConfig,
    query_path: str,
    gallery_path: str,
    force: bool = False,
    run_logger: RunLogger = None,
) -> Dict[str, Any]:
    """
    Evaluate two embedding files and write ``report.csv``, ``report.md`` and ``cmc.csv``.

    Raises:
        DimensionError: the files hold descriptors of different dimension
    """
    query = load_embeddings(query_path)
    gallery = load_embeddings(gallery_path)
    if query.dim != gallery.dim:
        raise DimensionError(f"query embeddings are {query.dim}-d but gallery embeddings are {gallery.dim}-d")
    report = evaluate(
        query, gallery,
        metric=config.metric,
        apply_protocol=config.protocol_filter,
        max_rank=config.max_rank,
    )
    out_dir = prepare_out_dir(config.out_dir, force=force)
    fingerprint = config.fingerprint()
    paths = write_report(out_dir, report, fingerprint)
    logger.info(format_summary(report))
    if run_logger:
        run_logger.log_evaluation("eval", -1, report.as_dict())
    summary = {"metrics": report.as_dict(), "metric": config.metric, "protocol_filter": config.protocol_filter, **paths}
    save_run_summary(out_dir, summary, fingerprint)
    return summary


def run(args: argparse.Namespace) -> Dict[str, Any]:
    config = resolve_config(
        args,
        metric=args.metric,
        protocol_filter=False if args.no_protocol_filter else None,
    )
    return cmd_eval(config, args.query, args.gallery, force=args.force, run_logger=RunLogger())
