"""
Weighted fusion of the three objectives:

    L = L_triplet + beta * L_center + L_cross
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from mros.autodiff import Tensor
from mros.errors import ContractError, TrainingDivergenceError

PARTS = ("triplet", "center", "cross")


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.3
    beta: float = 0.0005
    epsilon: float = 0.1


def total_loss(parts: Dict[str, Tensor], weights: LossWeights) -> Tensor:
    """
    Combine loss parts; triplet and cross-entropy carry weight 1.

    Raises:
        TrainingDivergenceError: naming the first non-finite part
    """
    for name in PARTS:
        if name not in parts:
            raise ContractError(f"missing loss part {name!r}")
        if not np.all(np.isfinite(parts[name].data)):
            raise TrainingDivergenceError(f"loss part {name!r} is not finite: {parts[name].data}", part=name)
    return parts["triplet"] + parts["center"] * weights.beta + parts["cross"]
