"""
Central finite-difference gradient checking.
"""

from typing import Callable, Dict, Sequence

import numpy as np

from mros.autodiff.tensor import Tensor, no_grad

DEFAULT_STEP = 1e-3
# only keeps an all-zero gradient pair from dividing by zero
SCALE_FLOOR = 1e-8


def numerical_gradient(fn: Callable[[], Tensor], wrt: Tensor, step: float = DEFAULT_STEP) -> np.ndarray:
    """
    Estimate d fn() / d wrt by central differences.

    ``fn`` must return a scalar tensor and read ``wrt.data`` on every call;
    ``wrt.data`` is perturbed in place and restored afterwards.
    """
    grad = np.zeros_like(wrt.data)
    flat = wrt.data.reshape(-1)
    grad_flat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            plus = fn().item()
            flat[i] = original - step
            minus = fn().item()
            flat[i] = original
            grad_flat[i] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm error divided by the larger gradient magnitude."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), SCALE_FLOOR)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def check_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor], step: float = DEFAULT_STEP) -> Dict[int, float]:
    """
    Compare backward() gradients against central differences.

    Args:
        fn: Zero-argument closure producing a scalar loss from ``inputs``
        inputs: Tensors with requires_grad=True
        step: Finite-difference step

    Returns:
        Mapping input position -> relative error
    """
    for t in inputs:
        t.zero_grad()
    fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]
    return {
        i: relative_error(analytic[i], numerical_gradient(fn, t, step))
        for i, t in enumerate(inputs)
    }
