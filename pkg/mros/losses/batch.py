"""
Batch containers shared by the metric losses.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from mros.autodiff import Tensor
from mros.errors import ContractError, DegenerateBatchError, DimensionError


@dataclass
class BatchEmbedding:
    """``m = P * K`` descriptors with one identity label per row."""

    G: Tensor
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.G.ndim != 2:
            raise DimensionError(f"embeddings must be m x D, got {self.G.shape}")
        if self.labels.shape != (self.G.shape[0],):
            raise DimensionError(f"{self.G.shape[0]} embeddings but {self.labels.shape[0]} labels")

    @property
    def m(self) -> int:
        return self.G.shape[0]

    def pk(self) -> Tuple[int, int]:
        """Return ``(P, K)``, validating the P x K structure."""
        if self.m == 0:
            raise ContractError("empty batch: K must be at least 1")
        ids, counts = np.unique(self.labels, return_counts=True)
        if ids.size < 2:
            raise DegenerateBatchError(f"batch-hard mining needs P >= 2 identities, got {ids.size}")
        if counts.min() != counts.max():
            raise ContractError(f"every identity must appear K times; counts are {sorted(set(counts.tolist()))}")
        return int(ids.size), int(counts[0])
