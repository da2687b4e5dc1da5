"""
Evaluation report artifacts: CSV plus a markdown table.
"""

from typing import Optional

from mros.evaluation.metrics import EvalReport
from mros.tools.artifacts import markdown_table, write_csv, write_text

# Market-1501 numbers of the complete model, shown for comparison only.
REFERENCE_ROW = ("reference (Market-1501)", 84.2, 94.4, 97.8, 98.7)
REPORT_HEADER = ("run", "mAP", "Rank-1", "Rank-5", "Rank-10")


def _percent(value: float) -> str:
    return f"{100.0 * value:.1f}"


def write_report(out_dir: str, report: EvalReport, fingerprint: str, name: str = "report", label: str = "this run") -> dict:
    """Write ``<name>.csv``, ``<name>.md`` and ``cmc.csv``; returns their paths."""
    csv_path = write_csv(
        out_dir,
        f"{name}.csv",
        ["mAP", "rank1", "rank5", "rank10", "num_queries", "skipped"],
        [[f"{report.mAP:.6f}", f"{report.rank1:.6f}", f"{report.rank5:.6f}", f"{report.rank10:.6f}",
          report.num_queries, report.skipped]],
        fingerprint=fingerprint,
    )
    cmc_path = write_csv(
        out_dir,
        "cmc.csv",
        ["rank", "accuracy"],
        [[k + 1, f"{v:.6f}"] for k, v in enumerate(report.cmc)],
        fingerprint=fingerprint,
    )
    table = markdown_table(REPORT_HEADER, [
        (label, _percent(report.mAP), _percent(report.rank1), _percent(report.rank5), _percent(report.rank10)),
        REFERENCE_ROW,
    ])
    md_path = write_text(out_dir, f"{name}.md", f"<!-- fingerprint={fingerprint} -->\n\n{table}")
    return {"csv": csv_path, "markdown": md_path, "cmc": cmc_path}


def format_summary(report: EvalReport, prefix: Optional[str] = None) -> str:
    head = f"{prefix}: " if prefix else ""
    return (
        f"{head}mAP {_percent(report.mAP)} | Rank-1 {_percent(report.rank1)} | "
        f"Rank-5 {_percent(report.rank5)} | Rank-10 {_percent(report.rank10)}"
    )
