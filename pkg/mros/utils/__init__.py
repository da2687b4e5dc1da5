"""Utility modules for MROS."""

from mros.utils.logging import get_logger, RunLogger, attach_file_handler

__all__ = [
    'get_logger',
    'RunLogger',
    'attach_file_handler'
]
