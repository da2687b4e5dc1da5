"""
Backbone + stripe head assembled into one model.
"""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from mros.autodiff import Tensor, no_grad
from mros.config import RunConfig
from mros.errors import ConfigurationError, FormatError
from mros.model.backbone import Backbone, FeatureFileBackbone, ToyBackbone
from mros.model.head import HeadOutput, HeadParams, Mode, forward_head
from mros.utils.logging import get_logger

logger = get_logger("mros.model.network")


class MROSNetwork:
    """Multi-resolution overlapping-stripe model."""

    def __init__(self, backbone: Backbone, head: HeadParams):
        self.backbone = backbone
        self.head = head
        c3, c4 = backbone.channels
        for resolution, c in ((3, c3), (4, c4)):
            if resolution in head.setting.resolutions and head.channels[resolution] != c:
                raise ConfigurationError(f"head C{resolution}={head.channels[resolution]} != backbone C{resolution}={c}")

    @classmethod
    def from_config(cls, config: RunConfig, num_classes: int) -> "MROSNetwork":
        if config.backbone == "features":
            backbone: Backbone = FeatureFileBackbone(config.feature_manifest, s=config.s)
        else:
            backbone = ToyBackbone(
                input_height=config.input_height,
                input_width=config.input_width,
                stem_channels=config.stem_channels,
                c3=config.c3,
                c4=config.c4,
                s=config.s,
                seed=config.seed,
            )
        c3, c4 = backbone.channels
        head = HeadParams.initialize(
            c3, c4, num_classes,
            s=config.s,
            setting=config.setting,
            fc_init_std=config.fc_init_std,
            bn_momentum=config.bn_momentum,
            bn_eps=config.bn_eps,
            seed=config.seed + 1,
        )
        return cls(backbone, head)

    @property
    def descriptor_dim(self) -> int:
        rows = self.head.setting.stripe_rows(self.head.s)
        return sum(rows * self.head.channels[r] for r in self.head.setting.resolutions)

    def forward(self, inputs, mode: Mode = "train") -> HeadOutput:
        return forward_head(self.backbone.forward(inputs), self.head, mode)

    def embed(self, inputs) -> np.ndarray:
        """Test-time descriptors ``G`` (no gradient recording)."""
        with no_grad():
            return self.forward(inputs, mode="eval").G.data.copy()

    def parameters(self) -> Dict[str, Tensor]:
        return {**self.backbone.parameters(), **self.head.parameters()}

    def buffers(self) -> Dict[str, np.ndarray]:
        return self.head.buffers()

    def count_parameters(self) -> int:
        return sum(t.size for t in self.parameters().values())

    def state_arrays(self) -> Dict[str, np.ndarray]:
        state = {name: t.data for name, t in self.parameters().items()}
        state.update(self.buffers())
        return state

    def load_state_arrays(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        params = self.parameters()
        missing = [name for name in params if name not in state]
        if strict and missing:
            raise FormatError(f"checkpoint lacks parameters: {missing[:5]}")
        for name, t in params.items():
            if name in state:
                if state[name].shape != t.shape:
                    raise FormatError(f"parameter {name}: checkpoint shape {state[name].shape} != model {t.shape}")
                t.data = np.array(state[name], dtype=np.float64)
        self.head.load_buffers(state)

    def zero_grad(self) -> None:
        for t in self.parameters().values():
            t.zero_grad()

    def summary(self, log: Optional[bool] = True) -> Dict[str, int]:
        info = {
            "parameters": self.count_parameters(),
            "classifiers": len(self.head.stripes),
            "descriptor_dim": self.descriptor_dim,
        }
        if log:
            logger.info(
                f"Setting {self.head.setting.value}: {info['classifiers']} classifiers, "
                f"descriptor {info['descriptor_dim']}-d, {info['parameters']} parameters"
            )
        return info
