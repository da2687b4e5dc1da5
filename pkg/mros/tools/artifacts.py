"""
Helpers for writing run artifacts (reports, CSVs, summaries).
"""

import csv
import json
import os
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence

from mros.errors import ConfigurationError

SUMMARY_NAME = "summary.json"


def prepare_out_dir(out_dir: str, force: bool = False) -> str:
    """
    Create the output directory.

    Args:
        out_dir: Target directory
        force: Allow writing into an existing non-empty directory

    Returns:
        Absolute path of the directory

    Raises:
        ConfigurationError: if the directory is non-empty and ``force`` is off
    """
    path = os.path.abspath(out_dir)
    if os.path.isdir(path) and os.listdir(path) and not force:
        raise ConfigurationError(f"output directory {out_dir} is not empty; pass --force to overwrite")
    os.makedirs(path, exist_ok=True)
    return path


def get_safe_path(out_dir: str, filepath: str) -> str:
    """Resolve ``filepath`` inside ``out_dir``; refuse paths that escape it."""
    if filepath.startswith("/"):
        filepath = filepath[1:]
    root = os.path.abspath(out_dir)
    full_path = os.path.abspath(os.path.join(root, filepath))
    if os.path.commonpath([root, full_path]) != root:
        raise ConfigurationError(f"artifact path {filepath} is outside {out_dir}")
    return full_path


def write_text(out_dir: str, filepath: str, content: str) -> str:
    path = get_safe_path(out_dir, filepath)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(content)
    return path


def write_csv(
    out_dir: str,
    filepath: str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    fingerprint: Optional[str] = None,
) -> str:
    """Write a CSV; the fingerprint goes in a leading ``# fingerprint=`` comment line."""
    path = get_safe_path(out_dir, filepath)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        if fingerprint:
            f.write(f"# fingerprint={fingerprint}\n")
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_csv(path: str) -> List[Dict[str, str]]:
    """Read a CSV written by ``write_csv`` (comment lines skipped)."""
    with open(path, newline="", encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def markdown_table(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(str(cell) for cell in row) + " |")
    return "\n".join(lines) + "\n"


def save_run_summary(out_dir: str, summary: Dict[str, Any], fingerprint: str) -> str:
    """
    Save a JSON run summary next to the other artifacts.

    Args:
        out_dir: Run directory
        summary: Command-specific summary
        fingerprint: Config fingerprint of the run

    Returns:
        Path to the summary file
    """
    payload = {
        "timestamp": datetime.now().isoformat(),
        "fingerprint": fingerprint,
        **summary,
    }
    path = get_safe_path(out_dir, SUMMARY_NAME)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, default=str)
    return path
