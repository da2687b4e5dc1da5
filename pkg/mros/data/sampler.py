"""
P x K identity sampling for batch-hard mining.
"""

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from mros.data.records import ImageRecord
from mros.errors import SamplerError


@dataclass
class PKBatch:
    """P identities x K records, grouped identity by identity."""

    records: List[ImageRecord]
    labels: np.ndarray
    P: int
    K: int

    @property
    def size(self) -> int:
        return len(self.records)


def group_by_label(train: Sequence[ImageRecord]) -> Dict[int, List[ImageRecord]]:
    groups: Dict[int, List[ImageRecord]] = defaultdict(list)
    for record in train:
        if record.label < 0:
            raise SamplerError(f"training record {record.path} has no dense label")
        groups[record.label].append(record)
    return dict(groups)


def _draw(records: List[ImageRecord], K: int, rng: np.random.Generator) -> List[ImageRecord]:
    replace = len(records) < K
    picks = rng.choice(len(records), size=K, replace=replace)
    return [records[i] for i in picks]


def pk_sample(
    train: Sequence[ImageRecord],
    P: int,
    K: int,
    rng: np.random.Generator,
    identities: Optional[Sequence[int]] = None,
) -> PKBatch:
    """
    Draw one batch: ``P`` distinct identities, ``K`` records each.

    Records are drawn without replacement when an identity has at least
    ``K`` of them, otherwise with replacement.

    Args:
        train: Training records carrying dense labels
        P: Identities per batch
        K: Samples per identity
        rng: Source of randomness
        identities: Use these labels instead of drawing ``P`` at random

    Raises:
        SamplerError: fewer than ``P`` identities are available
    """
    if K < 1:
        raise SamplerError(f"K must be at least 1, got {K}")
    groups = group_by_label(train)
    if len(groups) < P:
        raise SamplerError(f"need at least P={P} identities, training set has {len(groups)}")
    if identities is None:
        labels = sorted(groups)
        identities = [labels[i] for i in rng.choice(len(labels), size=P, replace=False)]
    elif len(set(identities)) != P:
        raise SamplerError(f"expected {P} distinct identities, got {list(identities)}")

    records: List[ImageRecord] = []
    for label in identities:
        records.extend(_draw(groups[label], K, rng))
    return PKBatch(records=records, labels=np.repeat(np.asarray(identities, dtype=np.int64), K), P=P, K=K)


class PKSampler:
    """
    Epoch iterator over P x K batches.

    An epoch is ``ceil(num_identities / P)`` batches. Identities are visited
    in a fresh random order; the last batch is topped up with identities not
    yet in it, so every identity appears at least once per epoch.
    """

    def __init__(self, train: Sequence[ImageRecord], P: int, K: int, rng: np.random.Generator):
        self.groups = group_by_label(train)
        if len(self.groups) < P:
            raise SamplerError(f"need at least P={P} identities, training set has {len(self.groups)}")
        self.train = list(train)
        self.P = P
        self.K = K
        self.rng = rng

    def __len__(self) -> int:
        return math.ceil(len(self.groups) / self.P)

    def __iter__(self) -> Iterator[PKBatch]:
        labels = sorted(self.groups)
        order = [labels[i] for i in self.rng.permutation(len(labels))]
        for b in range(len(self)):
            chunk = order[b * self.P:(b + 1) * self.P]
            if len(chunk) < self.P:
                rest = [label for label in order if label not in chunk]
                fill = self.rng.choice(len(rest), size=self.P - len(chunk), replace=False)
                chunk = chunk + [rest[i] for i in sorted(fill)]
            yield pk_sample(self.train, self.P, self.K, self.rng, identities=chunk)
