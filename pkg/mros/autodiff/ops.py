"""
Differentiable operations used by the backbone, head and losses.

All kernels are vectorized numpy on float64 storage. Image-like inputs are
laid out channels-first, either ``C x H x W`` or batched ``N x C x H x W``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from mros.autodiff.tensor import DTYPE, Tensor
from mros.errors import ContractError, DegenerateBatchError, DimensionError

Mode = Literal["train", "eval"]


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of ``a[m x k]`` and ``b[k x n]``."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    a_data, b_data = a.data, b.data
    return Tensor._from_op(
        a_data @ b_data,
        (a, b),
        lambda g: (g @ b_data.T, a_data.T @ g),
        "matmul",
    )


def relu(x: Tensor) -> Tensor:
    # subgradient at 0 is 0
    mask = x.data > 0
    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1) -> Tensor:
    """
    Valid (unpadded) cross-correlation.

    Args:
        x: ``C_in x H x W`` or ``N x C_in x H x W`` input
        kernels: ``C_out x C_in x kh x kw`` filters
        stride: Step between windows, same along both axes

    Returns:
        ``C_out x H' x W'`` (or batched) with ``H' = (H - kh) // stride + 1``
    """
    if stride < 1:
        raise ContractError(f"conv2d stride must be positive, got {stride}")
    batched = x.ndim == 4
    if x.ndim not in (3, 4) or kernels.ndim != 4:
        raise DimensionError(f"conv2d expects (N,)C,H,W input and 4-d kernels, got {x.shape} and {kernels.shape}")
    data = x.data if batched else x.data[None]
    _, channels, height, width = data.shape
    out_channels, k_channels, kh, kw = kernels.shape
    if k_channels != channels:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape}, kernels {kernels.shape}")
    if kh > height or kw > width:
        raise DimensionError(f"conv2d kernel {kh}x{kw} larger than input {height}x{width}")

    windows = sliding_window_view(data, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    weights = kernels.data
    out = np.einsum("nchwij,ocij->nohw", windows, weights, optimize=True)

    def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g4 = g if batched else g[None]
        grad_k = np.einsum("nchwij,nohw->ocij", windows, g4, optimize=True)
        grad_x = np.zeros_like(data)
        row_span = stride * (out_h - 1) + 1
        col_span = stride * (out_w - 1) + 1
        for i in range(kh):
            for j in range(kw):
                grad_x[:, :, i:i + row_span:stride, j:j + col_span:stride] += np.einsum(
                    "nohw,oc->nchw", g4, weights[:, :, i, j], optimize=True
                )
        return (grad_x if batched else grad_x[0], grad_k)

    return Tensor._from_op(out if batched else out[0], (x, kernels), _backward, "conv2d")


@dataclass
class BatchNormStats:
    """Running statistics of one 1-d batch-norm layer."""

    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def initial(cls, channels: int, momentum: float = 0.1, eps: float = 1e-5) -> "BatchNormStats":
        return cls(np.zeros(channels, dtype=DTYPE), np.ones(channels, dtype=DTYPE), momentum, eps)


def batch_norm_1d(x: Tensor, gamma: Tensor, beta: Tensor, stats: BatchNormStats, mode: Mode = "train") -> Tensor:
    """
    Batch normalization over the rows of ``x[m x C]``.

    Train mode normalizes with the biased batch variance and folds the
    unbiased variance into the running estimate; eval mode uses the
    running estimate only.
    """
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise DimensionError(f"batch_norm_1d shapes: x {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    m = x.shape[0]
    g_data = gamma.data

    if mode == "train":
        if m < 2:
            raise DegenerateBatchError("batch_norm_1d in train mode needs at least 2 rows")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + stats.eps)
        x_hat = (x.data - mu) * inv_std
        stats.mean = (1.0 - stats.momentum) * stats.mean + stats.momentum * mu
        stats.var = (1.0 - stats.momentum) * stats.var + stats.momentum * var * m / (m - 1)

        def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
            d_hat = g * g_data
            grad_x = inv_std / m * (m * d_hat - d_hat.sum(axis=0) - x_hat * (d_hat * x_hat).sum(axis=0))
            return grad_x, (g * x_hat).sum(axis=0), g.sum(axis=0)

    elif mode == "eval":
        inv_std = 1.0 / np.sqrt(stats.var + stats.eps)
        x_hat = (x.data - stats.mean) * inv_std

        def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
            return g * g_data * inv_std, (g * x_hat).sum(axis=0), g.sum(axis=0)

    else:
        raise ContractError(f"unknown batch-norm mode {mode!r}")

    return Tensor._from_op(x_hat * g_data + beta.data, (x, gamma, beta), _backward, "batch_norm_1d")


def mean_over_region(t: Tensor, row_start: int, row_stop: int) -> Tensor:
    """
    Average a ``(N x) C x H x W`` tensor over rows ``[row_start, row_stop)``
    and all columns, giving one value per channel.
    """
    if t.ndim < 3:
        raise DimensionError(f"mean_over_region needs (N,)C,H,W input, got {t.shape}")
    height, width = t.shape[-2], t.shape[-1]
    if not 0 <= row_start < row_stop <= height:
        raise ContractError(f"row range [{row_start}, {row_stop}) outside height {height}")
    count = float((row_stop - row_start) * width)
    shape = t.shape

    def _backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros(shape, dtype=DTYPE)
        full[..., row_start:row_stop, :] = (g / count)[..., None, None]
        return (full,)

    out = t.data[..., row_start:row_stop, :].sum(axis=(-2, -1)) / count
    return Tensor._from_op(out, (t,), _backward, "mean_over_region")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractError("concat of an empty sequence")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._from_op(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractError("stack of an empty sequence")
    out = np.stack([t.data for t in tensors], axis=axis)
    count = len(tensors)
    return Tensor._from_op(
        out,
        tuple(tensors),
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(count)),
        "stack",
    )


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Log-softmax stabilized by subtracting the per-row maximum."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    probs = np.exp(out)
    return Tensor._from_op(
        out,
        (x,),
        lambda g: (g - probs * g.sum(axis=axis, keepdims=True),),
        "log_softmax",
    )


def row_norm(x: Tensor) -> Tensor:
    """Euclidean norm of every row of ``x[m x D]``; subgradient 0 at the origin."""
    if x.ndim != 2:
        raise DimensionError(f"row_norm expects a matrix, got {x.shape}")
    norms = np.sqrt((x.data * x.data).sum(axis=1))
    safe = np.where(norms > 0, norms, 1.0)

    def _backward(g: np.ndarray) -> Tuple[np.ndarray]:
        scale = np.where(norms > 0, g / safe, 0.0)
        return (x.data * scale[:, None],)

    return Tensor._from_op(norms, (x,), _backward, "row_norm")
