"""
Backbones producing the two feature resolutions T3 and T4.

Two implementations share the ``Backbone`` protocol: a tiny strided conv
network trained end to end, and a loader for pre-computed feature tensors
(e.g. exported from a pretrained ResNet-50).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Protocol, Sequence, Tuple, Union

import numpy as np

from mros.autodiff import Tensor, conv2d, load_tensor, relu, stack
from mros.errors import ConfigurationError, DataError, GeometryError
from mros.utils.logging import get_logger

logger = get_logger("mros.model.backbone")


@dataclass
class BackboneOutput:
    """Feature tensors of the last two blocks, ``N x C x H x W`` each."""

    t3: Tensor
    t4: Tensor

    def validate(self, s: int) -> None:
        for tag, t in (("t3", self.t3), ("t4", self.t4)):
            if t.ndim != 4:
                raise GeometryError(f"{tag} must be N x C x H x W, got {t.shape}")
            if t.shape[2] % s != 0:
                raise GeometryError(f"{tag} height H={t.shape[2]} is not divisible by s={s}")

    @property
    def channels(self) -> Tuple[int, int]:
        return self.t3.shape[1], self.t4.shape[1]


class Backbone(Protocol):
    kind: str

    def forward(self, inputs) -> BackboneOutput: ...

    def parameters(self) -> Dict[str, Tensor]: ...

    @property
    def channels(self) -> Tuple[int, int]: ...


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    return (size - kernel) // stride + 1


class ToyBackbone:
    """
    Three strided convolutions: stem -> block3 (T3) -> block4 (T4).

    With the default 3 x 48 x 24 input and 2 x 2 stride-2 kernels the
    feature heights are 24 -> 12 -> 6, so T3 has twice the height of T4
    and half its channels.
    """

    kind = "images"

    def __init__(
        self,
        input_height: int = 48,
        input_width: int = 24,
        stem_channels: int = 16,
        c3: int = 32,
        c4: int = 64,
        kernel: int = 2,
        stride: int = 2,
        s: int = 6,
        seed: int = 0,
    ):
        self.input_shape = (3, input_height, input_width)
        self.kernel = kernel
        self.stride = stride
        self.layout = (("stem", 3, stem_channels), ("block3", stem_channels, c3), ("block4", c3, c4))

        height, width = input_height, input_width
        self.feature_shapes: Dict[str, Tuple[int, int, int]] = {}
        for name, _, out_c in self.layout:
            if height < kernel or width < kernel:
                raise GeometryError(f"{name}: kernel {kernel} larger than feature map {height}x{width}")
            height = conv_output_size(height, kernel, stride)
            width = conv_output_size(width, kernel, stride)
            self.feature_shapes[name] = (out_c, height, width)
        for name in ("block3", "block4"):
            h = self.feature_shapes[name][1]
            if h % s != 0:
                raise GeometryError(
                    f"{name} output height {h} not divisible by s={s} for input {input_height}x{input_width}"
                )

        rng = np.random.default_rng(seed)
        self.weights: Dict[str, Tensor] = {}
        self.biases: Dict[str, Tensor] = {}
        for name, in_c, out_c in self.layout:
            fan_in = in_c * kernel * kernel
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(out_c, in_c, kernel, kernel))
            self.weights[name] = Tensor(w, requires_grad=True, name=f"backbone.{name}.weight")
            self.biases[name] = Tensor(np.zeros((out_c, 1, 1)), requires_grad=True, name=f"backbone.{name}.bias")
        logger.debug(f"ToyBackbone feature shapes: {self.feature_shapes}")

    @property
    def channels(self) -> Tuple[int, int]:
        return self.feature_shapes["block3"][0], self.feature_shapes["block4"][0]

    def forward(self, images: Tensor) -> BackboneOutput:
        if images.ndim == 3:
            images = images.reshape((1,) + images.shape)
        if tuple(images.shape[1:]) != self.input_shape:
            raise GeometryError(f"backbone expects images of shape {self.input_shape}, got {images.shape[1:]}")
        features = {}
        x = images
        for name, _, _ in self.layout:
            x = relu(conv2d(x, self.weights[name], self.stride) + self.biases[name])
            features[name] = x
        return BackboneOutput(t3=features["block3"], t4=features["block4"])

    def parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for name, _, _ in self.layout:
            params[f"backbone.{name}.weight"] = self.weights[name]
            params[f"backbone.{name}.bias"] = self.biases[name]
        return params


class FeatureFileBackbone:
    """
    Serves pre-computed (T3, T4) tensors listed in a manifest.

    The manifest is a CSV with columns ``image_id,t3_path,t4_path``; paths
    are relative to the manifest's directory unless absolute. Each tensor
    file holds one ``C x H x W`` tensor in the binary tensor format.
    """

    kind = "features"

    def __init__(self, manifest: Union[str, Path], s: int = 6):
        self.manifest = Path(manifest)
        self.s = s
        if not self.manifest.exists():
            raise DataError(f"feature manifest not found: {self.manifest}")
        self.entries: Dict[str, Tuple[Path, Path]] = {}
        with open(self.manifest, newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                base = self.manifest.parent
                self.entries[row["image_id"]] = (base / row["t3_path"], base / row["t4_path"])
        if not self.entries:
            raise DataError(f"feature manifest {self.manifest} lists no images")
        first = next(iter(self.entries))
        t3, t4 = self._load(first)
        self._channels = (t3.shape[0], t4.shape[0])
        logger.info(f"Feature backbone: {len(self.entries)} images, C3={t3.shape[0]}, C4={t4.shape[0]}")

    @property
    def channels(self) -> Tuple[int, int]:
        return self._channels

    def _load(self, image_id: str) -> Tuple[Tensor, Tensor]:
        if image_id not in self.entries:
            raise DataError(f"image {image_id!r} missing from feature manifest {self.manifest}")
        t3_path, t4_path = self.entries[image_id]
        t3, t4 = load_tensor(t3_path), load_tensor(t4_path)
        for tag, t in (("t3", t3), ("t4", t4)):
            if t.ndim != 3 or t.shape[1] % self.s != 0:
                raise GeometryError(f"{tag} of {image_id} has shape {t.shape}; height must divide by s={self.s}")
        return t3, t4

    def forward(self, image_ids: Sequence[str]) -> BackboneOutput:
        loaded: List[Tuple[Tensor, Tensor]] = [self._load(i) for i in image_ids]
        return BackboneOutput(
            t3=stack([pair[0] for pair in loaded], axis=0),
            t4=stack([pair[1] for pair in loaded], axis=0),
        )

    def parameters(self) -> Dict[str, Tensor]:
        return {}


def build_backbone(kind: str, **kwargs) -> Backbone:
    if kind == "toy":
        return ToyBackbone(**kwargs)
    if kind == "features":
        return FeatureFileBackbone(kwargs["manifest"], s=kwargs.get("s", 6))
    raise ConfigurationError(f"unknown backbone {kind!r}; expected 'toy' or 'features'")
