"""
Adam with bias-corrected moments. Weight decay, when enabled, is added to
the gradient as an L2 term before the moment update.
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from mros.autodiff import Tensor
from mros.config import RunConfig
from mros.errors import DimensionError, TrainingDivergenceError


@dataclass
class OptimizerState:
    """Per-parameter moment accumulators plus the shared step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: RunConfig) -> "OptimizerState":
        return cls(
            beta1=config.adam_beta1,
            beta2=config.adam_beta2,
            eps=config.adam_eps,
            weight_decay=config.weight_decay,
        )

    def moments(self, name: str, shape) -> tuple:
        if name not in self.m:
            self.m[name] = np.zeros(shape, dtype=np.float64)
            self.v[name] = np.zeros(shape, dtype=np.float64)
        if self.m[name].shape != tuple(shape):
            raise DimensionError(f"optimizer moments of {name} have shape {self.m[name].shape}, parameter {tuple(shape)}")
        return self.m[name], self.v[name]


def adam_step(params: Dict[str, Tensor], state: OptimizerState, lr: float) -> OptimizerState:
    """
    Apply one Adam update in place, reading each parameter's ``grad``.

    Parameters without a gradient are treated as having a zero gradient.

    Raises:
        TrainingDivergenceError: naming the first parameter with a non-finite gradient
    """
    grads = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise DimensionError(f"gradient of {name} has shape {g.shape}, parameter {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(f"non-finite gradient in parameter {name}", part=name)
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        grads[name] = g

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        m, v = state.moments(name, p.data.shape)
        g = grads[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state
