"""
``mros ablate``: train Settings I-IV under one budget and tabulate them.

Full-scale Market-1501 reference numbers of each setting are shown as a static
column; they are never recomputed here.
"""

import argparse
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from mros.commands.common import mirror_log, resolve_config
from mros.config import AblationSetting, RunConfig
from mros.data import BatchLoader, open_dataset
from mros.errors import MROSError
from mros.tools.artifacts import markdown_table, prepare_out_dir, save_run_summary, write_csv, write_text
from mros.training import evaluate_model, fit
from mros.utils.logging import RunLogger, get_logger

logger = get_logger("mros.commands.ablate")

# (mAP, Rank-1) on Market-1501
REFERENCE = {
    AblationSetting.I: (81.8, 93.2),
    AblationSetting.II: (82.8, 93.5),
    AblationSetting.III: (84.0, 94.2),
    AblationSetting.IV: (84.2, 94.4),
}
TABLE_HEADER = ("Setting", "mAP", "Rank-1", "classifiers", "parameters", "reference mAP", "reference Rank-1")


@dataclass
class AblationRow:
    setting: AblationSetting
    mAP: Optional[float] = None
    rank1: Optional[float] = None
    classifiers: Optional[int] = None
    parameters: Optional[int] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def cells(self) -> List[str]:
        ref_map, ref_r1 = REFERENCE[self.setting]
        if self.failed:
            measured = ["failed", "failed"]
        else:
            measured = [f"{100.0 * self.mAP:.1f}", f"{100.0 * self.rank1:.1f}"]
        return [
            self.setting.value,
            *measured,
            "" if self.classifiers is None else str(self.classifiers),
            "" if self.parameters is None else str(self.parameters),
            f"{ref_map:.1f}",
            f"{ref_r1:.1f}",
        ]


def run_setting(config: RunConfig, dataset, images) -> AblationRow:
    os.makedirs(config.out_dir, exist_ok=True)
    result = fit(config, config.out_dir, dataset=dataset, images=images)
    report = result.report
    if report is None:
        report = evaluate_model(result.state, dataset, BatchLoader(config, images=images))
    info = result.state.model.summary(log=False)
    return AblationRow(
        setting=config.setting,
        mAP=report.mAP,
        rank1=report.rank1,
        classifiers=info["classifiers"],
        parameters=info["parameters"],
    )


def cmd_ablate(config: RunConfig, force: bool = False, run_logger: Optional[RunLogger] = None) -> Dict[str, Any]:
    """
    Train every setting in order I-IV and write ``ablation.md`` / ``ablation.csv``.

    A failing setting is marked in its row; the remaining settings still run.

    Returns:
        Rows of the table and the output paths
    """
    out_dir = prepare_out_dir(config.out_dir, force=force)
    mirror_log(out_dir)
    dataset, images = open_dataset(config)
    fingerprint = config.fingerprint()

    rows: List[AblationRow] = []
    errors: List[MROSError] = []
    for setting in AblationSetting:
        setting_config = config.with_overrides(setting=setting, out_dir=os.path.join(out_dir, f"setting_{setting.value}"))
        logger.info(f"=== Setting {setting.value} ===")
        try:
            row = run_setting(setting_config, dataset, images)
        except MROSError as e:
            logger.error(f"Setting {setting.value} failed: {e}")
            if run_logger:
                run_logger.log_error("ablate", str(e), part=setting.value)
            row = AblationRow(setting=setting, error=str(e))
            errors.append(e)
        rows.append(row)
        if run_logger and not row.failed:
            run_logger.log_evaluation("ablate", setting_config.epochs, {"setting": setting.value, "mAP": row.mAP, "rank1": row.rank1})

    cells = [row.cells() for row in rows]
    csv_path = write_csv(out_dir, "ablation.csv", TABLE_HEADER, cells, fingerprint=fingerprint)
    md_path = write_text(out_dir, "ablation.md", f"<!-- fingerprint={fingerprint} -->\n\n{markdown_table(TABLE_HEADER, cells)}")
    summary = {
        "rows": [{"setting": r.setting.value, "mAP": r.mAP, "rank1": r.rank1, "error": r.error} for r in rows],
        "csv": csv_path,
        "markdown": md_path,
    }
    save_run_summary(out_dir, summary, fingerprint)
    if len(errors) == len(rows):
        raise errors[0]
    return summary


def run(args: argparse.Namespace) -> Dict[str, Any]:
    config = resolve_config(args, epochs=args.epochs)
    return cmd_ablate(config, force=args.force, run_logger=RunLogger())
