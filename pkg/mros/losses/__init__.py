"""Metric and classification losses."""

from mros.losses.batch import BatchEmbedding
from mros.losses.triplet import triplet_batch_hard, mine_hardest
from mros.losses.center import ClassCenters, center_loss, update_centers
from mros.losses.cross_entropy import cross_entropy_ls, total_cross_entropy, smoothed_targets
from mros.losses.composite import LossWeights, total_loss

__all__ = [
    'BatchEmbedding',
    'triplet_batch_hard',
    'mine_hardest',
    'ClassCenters',
    'center_loss',
    'update_centers',
    'cross_entropy_ls',
    'total_cross_entropy',
    'smoothed_targets',
    'LossWeights',
    'total_loss',
]
