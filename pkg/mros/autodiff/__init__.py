"""Minimal dense tensor type with reverse-mode differentiation."""

from mros.autodiff.tensor import ComputationRecord, Tensor, no_grad, is_grad_enabled
from mros.autodiff.ops import (
    BatchNormStats,
    batch_norm_1d,
    concat,
    conv2d,
    log_softmax,
    matmul,
    mean_over_region,
    relu,
    row_norm,
    stack,
)
from mros.autodiff.gradcheck import check_gradients, numerical_gradient
from mros.autodiff.serialization import load_tensor, save_tensor

__all__ = [
    'Tensor',
    'ComputationRecord',
    'no_grad',
    'is_grad_enabled',

    # differentiable operations
    'matmul',
    'conv2d',
    'batch_norm_1d',
    'BatchNormStats',
    'relu',
    'mean_over_region',
    'concat',
    'stack',
    'log_softmax',
    'row_norm',

    # utilities
    'check_gradients',
    'numerical_gradient',
    'save_tensor',
    'load_tensor',
]
