"""
Label-smoothed cross-entropy and its mean over stripe classifiers.
"""

from typing import Sequence, Union

import numpy as np

from mros.autodiff import Tensor, log_softmax
from mros.errors import ConfigurationError, ContractError, DimensionError


def smoothed_targets(labels: np.ndarray, num_classes: int, epsilon: float) -> np.ndarray:
    """``q(c) = (1 - epsilon) * 1[c = y] + epsilon / C`` for every row."""
    q = np.full((labels.size, num_classes), epsilon / num_classes, dtype=np.float64)
    q[np.arange(labels.size), labels] += 1.0 - epsilon
    return q


def cross_entropy_ls(logits: Tensor, label: Union[int, Sequence[int], np.ndarray], epsilon: float = 0.1) -> Tensor:
    """
    Negative log-likelihood against the label-smoothed target.

    Args:
        logits: ``C`` vector or ``m x C`` batch
        label: Class index (or one per row)
        epsilon: Smoothing mass in [0, 1)

    Returns:
        Scalar loss, averaged over rows for batched input
    """
    if not 0.0 <= epsilon < 1.0:
        raise ContractError(f"epsilon must lie in [0, 1), got {epsilon}")
    single = logits.ndim == 1
    if single:
        logits = logits.reshape(1, logits.shape[0])
    if logits.ndim != 2:
        raise DimensionError(f"logits must be C or m x C, got {logits.shape}")
    m, num_classes = logits.shape
    if num_classes < 2:
        raise ContractError(f"cross-entropy needs C >= 2 classes, got {num_classes}")
    labels = np.atleast_1d(np.asarray(label, dtype=np.int64))
    if labels.shape != (m,):
        raise DimensionError(f"{m} logit rows but {labels.size} labels")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ContractError(f"label out of range [0, {num_classes}): {labels.tolist()}")

    q = smoothed_targets(labels, num_classes, epsilon)
    return -(log_softmax(logits, axis=1) * Tensor(q)).sum() / float(m)


def total_cross_entropy(
    logit_sets: Sequence[Tensor],
    labels: np.ndarray,
    epsilon: float = 0.1,
    expected_count: int = 10,
) -> Tensor:
    """
    Mean of the per-stripe batch cross-entropies.

    Args:
        logit_sets: One ``m x C`` tensor per stripe classifier
        labels: Identity index per row
        epsilon: Label-smoothing mass
        expected_count: Number of stripe classifiers the model has, 2(s-1)
            for the complete model

    Returns:
        ``(1 / expected_count) * sum_k CE_k``
    """
    if len(logit_sets) != expected_count:
        raise ConfigurationError(f"expected {expected_count} stripe logit sets, got {len(logit_sets)}")
    total = cross_entropy_ls(logit_sets[0], labels, epsilon)
    for logits in logit_sets[1:]:
        total = total + cross_entropy_ls(logits, labels, epsilon)
    return total / float(expected_count)
