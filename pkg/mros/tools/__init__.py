"""Artifact helpers shared by the commands."""

from mros.tools.artifacts import (
    get_safe_path,
    markdown_table,
    prepare_out_dir,
    read_csv,
    save_run_summary,
    write_csv,
    write_text,
)

__all__ = [
    'prepare_out_dir',
    'get_safe_path',
    'write_text',
    'write_csv',
    'read_csv',
    'markdown_table',
    'save_run_summary',
]
