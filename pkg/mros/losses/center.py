"""
Center loss and its dedicated center update rule.

Centers are not optimized by Adam; after every step each class present in
the batch moves toward the mean of its samples:

    delta_j = sum_{i: y_i = j} (c_j - G_i) / (1 + count_j)
    c_j <- c_j - update_rate * delta_j
"""

from dataclasses import dataclass

import numpy as np

from mros.autodiff import Tensor
from mros.errors import DimensionError, MissingCenterError
from mros.losses.batch import BatchEmbedding


@dataclass
class ClassCenters:
    """One center row per training identity."""

    c: np.ndarray
    update_rate: float = 0.5

    @classmethod
    def zeros(cls, num_classes: int, dim: int, update_rate: float = 0.5) -> "ClassCenters":
        return cls(np.zeros((num_classes, dim), dtype=np.float64), update_rate)

    @property
    def num_classes(self) -> int:
        return self.c.shape[0]

    def check(self, batch: BatchEmbedding) -> None:
        if self.c.shape[1] != batch.G.shape[1]:
            raise DimensionError(f"centers are {self.c.shape[1]}-d, embeddings {batch.G.shape[1]}-d")
        labels = batch.labels
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            bad = sorted({int(y) for y in labels if y < 0 or y >= self.num_classes})
            raise MissingCenterError(f"no center for labels {bad} (have {self.num_classes} classes)")


def center_loss(batch: BatchEmbedding, centers: ClassCenters) -> Tensor:
    """``0.5 * sum_i ||G_i - c_{y_i}||^2``; centers act as constants."""
    centers.check(batch)
    diff = batch.G - Tensor(centers.c[batch.labels])
    return diff.square().sum() * 0.5


def update_centers(batch: BatchEmbedding, centers: ClassCenters) -> ClassCenters:
    """Move every center present in the batch toward its samples (in place)."""
    centers.check(batch)
    G = batch.G.data
    for j in np.unique(batch.labels):
        members = G[batch.labels == j]
        delta = (centers.c[j] - members).sum(axis=0) / (1.0 + members.shape[0])
        centers.c[j] = centers.c[j] - centers.update_rate * delta
    return centers
