"""
Stripe head: pooling, per-stripe batch norm and per-stripe classifiers.

Classifier order is fixed: resolution-3 stripes top to bottom, then
resolution-4 stripes top to bottom. The descriptor ``G`` concatenates the
raw (pre-BN) pooled rows in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional

import numpy as np

from mros.autodiff import BatchNormStats, Tensor, batch_norm_1d, concat, matmul, stack
from mros.config import AblationSetting
from mros.errors import ConfigurationError
from mros.model.backbone import BackboneOutput
from mros.model.pooling import StripeFeatures, non_overlap_pool, overlap_pool

Mode = Literal["train", "eval"]


@dataclass
class StripeHead:
    """BN + FC classifier attached to one pooled stripe row."""

    name: str
    resolution: int
    row: int
    gamma: Tensor
    beta: Tensor
    stats: BatchNormStats
    weight: Tensor
    bias: Tensor

    @property
    def channels(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> Dict[str, Tensor]:
        return {
            f"head.{self.name}.bn.gamma": self.gamma,
            f"head.{self.name}.bn.beta": self.beta,
            f"head.{self.name}.fc.weight": self.weight,
            f"head.{self.name}.fc.bias": self.bias,
        }

    def buffers(self) -> Dict[str, np.ndarray]:
        return {
            f"head.{self.name}.bn.running_mean": self.stats.mean,
            f"head.{self.name}.bn.running_var": self.stats.var,
        }


@dataclass
class HeadParams:
    """All stripe heads of one model plus the geometry they were built for."""

    s: int
    setting: AblationSetting
    num_classes: int
    channels: Dict[int, int]
    stripes: List[StripeHead] = field(default_factory=list)

    @classmethod
    def initialize(
        cls,
        c3: int,
        c4: int,
        num_classes: int,
        s: int = 6,
        setting: AblationSetting = AblationSetting.IV,
        fc_init_std: float = 0.001,
        bn_momentum: float = 0.1,
        bn_eps: float = 1e-5,
        seed: int = 0,
    ) -> "HeadParams":
        """
        Build BN (gamma=1, beta=0) and FC (normal std ``fc_init_std``, zero
        bias) parameters for every stripe row of every used resolution.
        """
        if num_classes < 2:
            raise ConfigurationError(f"classifier needs at least 2 classes, got {num_classes}")
        rng = np.random.default_rng(seed)
        channels = {3: c3, 4: c4}
        params = cls(s=s, setting=setting, num_classes=num_classes, channels=channels)
        for resolution in setting.resolutions:
            c = channels[resolution]
            for row in range(setting.stripe_rows(s)):
                params.stripes.append(StripeHead(
                    name=f"r{resolution}.s{row}",
                    resolution=resolution,
                    row=row,
                    gamma=Tensor(np.ones(c), requires_grad=True),
                    beta=Tensor(np.zeros(c), requires_grad=True),
                    stats=BatchNormStats.initial(c, momentum=bn_momentum, eps=bn_eps),
                    weight=Tensor(rng.normal(0.0, fc_init_std, size=(c, num_classes)), requires_grad=True),
                    bias=Tensor(np.zeros(num_classes), requires_grad=True),
                ))
        return params

    def parameters(self) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for stripe in self.stripes:
            out.update(stripe.parameters())
        return out

    def buffers(self) -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {}
        for stripe in self.stripes:
            out.update(stripe.buffers())
        return out

    def load_buffers(self, buffers: Dict[str, np.ndarray]) -> None:
        for stripe in self.stripes:
            stripe.stats.mean = np.array(buffers[f"head.{stripe.name}.bn.running_mean"])
            stripe.stats.var = np.array(buffers[f"head.{stripe.name}.bn.running_var"])


@dataclass
class HeadOutput:
    """
    G: ``N x D`` descriptor (raw pooled rows, used at test time)
    h3, h4: ``N x rows x C`` post-BN stripe features (None if unused)
    logits: one ``N x num_classes`` tensor per stripe head
    metric_features: tensors the triplet and center losses act on
    """

    G: Tensor
    g: Dict[int, StripeFeatures]
    h3: Optional[Tensor] = None
    h4: Optional[Tensor] = None
    logits: List[Tensor] = field(default_factory=list)
    metric_features: List[Tensor] = field(default_factory=list)


def pool_features(bo: BackboneOutput, s: int, setting: AblationSetting) -> Dict[int, StripeFeatures]:
    pool = overlap_pool if setting.overlapping else non_overlap_pool
    tensors = {3: bo.t3, 4: bo.t4}
    return {r: pool(tensors[r], s, resolution_tag=r) for r in setting.resolutions}


def build_descriptor(pooled: Dict[int, StripeFeatures]) -> Tensor:
    """Flatten pooled rows per sample: all resolution-3 rows, then resolution-4 rows."""
    flat = []
    for resolution in sorted(pooled):
        g = pooled[resolution].g
        flat.append(g.reshape(g.shape[0], g.shape[1] * g.shape[2]))
    return flat[0] if len(flat) == 1 else concat(flat, axis=1)


def _check_geometry(bo: BackboneOutput, params: HeadParams) -> None:
    bo.validate(params.s)
    c3, c4 = bo.channels
    got = {3: c3, 4: c4}
    for resolution in params.setting.resolutions:
        if got[resolution] != params.channels[resolution]:
            raise ConfigurationError(
                f"head expects C{resolution}={params.channels[resolution]}, backbone produced {got[resolution]}"
            )
    expected = params.setting.classifier_count(params.s)
    if len(params.stripes) != expected:
        raise ConfigurationError(f"head has {len(params.stripes)} stripe classifiers, geometry needs {expected}")


def forward_head(bo: BackboneOutput, params: HeadParams, mode: Mode = "train") -> HeadOutput:
    """
    Pool, normalize and classify the stripes of both feature resolutions.

    Args:
        bo: Batched backbone output
        params: Head parameters matching the backbone geometry
        mode: ``train`` uses batch statistics, ``eval`` running statistics

    Returns:
        Descriptor, per-resolution BN features, per-stripe logits and the
        features the metric losses attach to
    """
    _check_geometry(bo, params)
    pooled = pool_features(bo, params.s, params.setting)
    G = build_descriptor(pooled)

    h_rows: Dict[int, List[Tensor]] = {r: [] for r in pooled}
    logits: List[Tensor] = []
    for stripe in params.stripes:
        g_row = pooled[stripe.resolution].row(stripe.row)
        h = batch_norm_1d(g_row, stripe.gamma, stripe.beta, stripe.stats, mode)
        h_rows[stripe.resolution].append(h)
        logits.append(matmul(h, stripe.weight) + stripe.bias)

    if params.setting.global_metric:
        metric_features = [G]
    else:
        metric_features = [pooled[4].row(i) for i in range(pooled[4].rows)]

    return HeadOutput(
        G=G,
        g=pooled,
        h3=stack(h_rows[3], axis=1) if h_rows.get(3) else None,
        h4=stack(h_rows[4], axis=1) if h_rows.get(4) else None,
        logits=logits,
        metric_features=metric_features,
    )
