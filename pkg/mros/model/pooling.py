"""
Horizontal stripe partition and stripe pooling.

Feature maps are ``C x H x W`` or batched ``N x C x H x W``; stripes are
cut along the height axis, top to bottom, with equal heights.
"""

from dataclasses import dataclass
from typing import List

from mros.autodiff import Tensor, mean_over_region, stack
from mros.errors import GeometryError


@dataclass
class StripeFeatures:
    """Pooled stripe vectors ``g`` with shape ``(N x) rows x C``."""

    g: Tensor
    resolution_tag: int

    @property
    def rows(self) -> int:
        return self.g.shape[-2]

    @property
    def channels(self) -> int:
        return self.g.shape[-1]

    def row(self, i: int) -> Tensor:
        """Stripe row ``i`` for every sample: ``(N x) C``."""
        return self.g[..., i, :]


def stripe_height(height: int, s: int) -> int:
    if s < 1:
        raise GeometryError(f"stripe count must be positive, got s={s}")
    if height % s != 0:
        raise GeometryError(f"feature height H={height} is not divisible by s={s}")
    return height // s


def partition_stripes(t: Tensor, s: int) -> List[Tensor]:
    """Split ``t`` into ``s`` contiguous equal-height stripes."""
    if s == 1:
        return [t]
    h = stripe_height(t.shape[-2], s)
    return [t[..., k * h:(k + 1) * h, :] for k in range(s)]


def overlap_pool(t: Tensor, s: int, resolution_tag: int = 4) -> StripeFeatures:
    """
    Average-pool every pair of adjacent stripes.

    Row ``i`` covers stripes ``i`` and ``i + 1``, i.e. rows
    ``[i*H/s, (i+2)*H/s)`` over the full width, so ``s - 1`` rows result.
    """
    if s < 2:
        raise GeometryError(f"overlapping stripes need s >= 2, got s={s}")
    h = stripe_height(t.shape[-2], s)
    rows = [mean_over_region(t, i * h, (i + 2) * h) for i in range(s - 1)]
    return StripeFeatures(stack(rows, axis=-2), resolution_tag)


def non_overlap_pool(t: Tensor, s: int, resolution_tag: int = 4) -> StripeFeatures:
    """Average-pool each of the ``s`` stripes on its own."""
    h = stripe_height(t.shape[-2], s)
    rows = [mean_over_region(t, k * h, (k + 1) * h) for k in range(s)]
    return StripeFeatures(stack(rows, axis=-2), resolution_tag)
