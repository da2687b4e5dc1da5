"""
Exception hierarchy for the MROS package.

Every error carries the process exit code the CLI reports for it:
2 usage/config, 3 data, 4 numeric divergence.
"""

from typing import Optional


class MROSError(Exception):
    """Base class for all package errors."""

    exit_code: int = 1


class ConfigurationError(MROSError):
    """Invalid configuration, wrong stripe count or head/backbone mismatch."""

    exit_code = 2


class GeometryError(ConfigurationError):
    """Feature-map geometry incompatible with the requested stripes or kernel."""

    exit_code = 2


class DimensionError(MROSError, ValueError):
    """Tensor or embedding shapes do not agree."""

    exit_code = 2


class ContractError(MROSError, ValueError):
    """A documented precondition of an operation was violated."""

    exit_code = 2


class DataError(MROSError):
    """Problems with datasets, batches or files on disk."""

    exit_code = 3


class ParseError(DataError):
    pass


class LayoutError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class SamplerError(DataError):
    pass


class SyntheticSpecError(DataError):
    pass


class DegenerateBatchError(DataError):
    pass


class MissingCenterError(DataError):
    pass


class EmptyEvaluationError(DataError):
    pass


class FormatError(DataError):
    """Binary tensor/embedding/checkpoint file is malformed."""


class TrainingDivergenceError(MROSError):
    """A loss part or gradient became non-finite."""

    exit_code = 4

    def __init__(self, message: str, part: Optional[str] = None):
        super().__init__(message)
        self.part = part
