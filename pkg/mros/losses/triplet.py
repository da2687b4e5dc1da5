"""
Batch-hard triplet loss.
"""

import numpy as np

from mros.autodiff import Tensor, relu, row_norm
from mros.losses.batch import BatchEmbedding


def mine_hardest(G: np.ndarray, labels: np.ndarray):
    """
    Indices of the hardest positive and hardest negative of every anchor.

    The positive set includes the anchor itself. Ties go to the lowest index.
    """
    # exact differences, so mining does not depend on cancellation in the Gram form
    dist = np.sqrt(((G[:, None, :] - G[None, :, :]) ** 2).sum(axis=2))
    same = labels[:, None] == labels[None, :]
    hardest_pos = np.argmax(np.where(same, dist, -np.inf), axis=1)
    hardest_neg = np.argmin(np.where(same, np.inf, dist), axis=1)
    return hardest_pos, hardest_neg


def triplet_batch_hard(batch: BatchEmbedding, alpha: float = 0.3) -> Tensor:
    """
    Sum over all anchors of ``[alpha + max_pos d(a, p) - min_neg d(a, n)]_+``.

    Args:
        batch: P x K embeddings with labels
        alpha: Margin

    Returns:
        Scalar loss, differentiable w.r.t. ``batch.G``
    """
    batch.pk()
    G = batch.G
    pos, neg = mine_hardest(G.data, batch.labels)
    anchors = np.arange(batch.m)
    d_pos = row_norm(G[anchors] - G[pos])
    d_neg = row_norm(G[anchors] - G[neg])
    return relu(d_pos - d_neg + alpha).sum()
