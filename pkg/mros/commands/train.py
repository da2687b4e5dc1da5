"""
``mros train``: fit a model and write its checkpoint and metrics.
"""

import argparse
from typing import Any, Dict, Optional

from mros.commands.common import mirror_log, resolve_config
from mros.config import RunConfig
from mros.evaluation import write_report
from mros.tools.artifacts import prepare_out_dir, save_run_summary
from mros.training import fit
from mros.utils.logging import RunLogger, get_logger

logger = get_logger("mros.commands.train")


def cmd_train(
    config: RunConfig,
    force: bool = False,
    resume: Optional[str] = None,
    run_logger: Optional[RunLogger] = None,
) -> Dict[str, Any]:
    """
    Train under ``config`` into ``config.out_dir``.

    Returns:
        Summary with checkpoint path, parameter count and final metrics
    """
    out_dir = prepare_out_dir(config.out_dir, force=force or bool(resume))
    mirror_log(out_dir)
    result = fit(config, out_dir, resume=resume, run_logger=run_logger)
    fingerprint = config.fingerprint()
    summary: Dict[str, Any] = {
        "setting": config.setting.value,
        "epochs": result.state.epoch,
        "parameters": result.state.model.count_parameters(),
        "checkpoint": result.checkpoint_path,
    }
    if result.report is not None:
        summary["metrics"] = result.report.as_dict()
        write_report(out_dir, result.report, fingerprint, label=f"Setting {config.setting.value}")
    save_run_summary(out_dir, summary, fingerprint)
    return summary


def run(args: argparse.Namespace) -> Dict[str, Any]:
    config = resolve_config(args, setting=args.setting, epochs=args.epochs)
    return cmd_train(config, force=args.force, resume=args.resume, run_logger=RunLogger())
