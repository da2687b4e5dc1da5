"""
Run configuration.

A ``RunConfig`` is loaded from a flat key-value YAML file and then
overridden by CLI flags (flag wins). Every output artifact embeds the
config fingerprint.
"""

from __future__ import annotations

import hashlib
import json
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from mros.errors import ConfigurationError

# Excluded from the fingerprint: moving a run must not change its identity.
_UNFINGERPRINTED = {"out_dir"}


class AblationSetting(str, Enum):
    """
    Model wiring of the four incremental ablation settings.

    I    s non-overlapping stripes on T4; all losses on local g4/h4
    II   as I with s-1 overlapping stripes
    III  overlapping T4 stripes, triplet/center on global G, CE on h4
    IV   complete model: adds the T3 resolution
    """

    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @classmethod
    def parse(cls, value: Union[str, "AblationSetting"]) -> "AblationSetting":
        try:
            return cls(str(value.value if isinstance(value, AblationSetting) else value).strip().upper())
        except ValueError:
            raise ConfigurationError(f"invalid setting {value!r}; expected one of I, II, III, IV") from None

    @property
    def overlapping(self) -> bool:
        return self is not AblationSetting.I

    @property
    def global_metric(self) -> bool:
        return self in (AblationSetting.III, AblationSetting.IV)

    @property
    def resolutions(self) -> Tuple[int, ...]:
        return (3, 4) if self is AblationSetting.IV else (4,)

    def stripe_rows(self, s: int) -> int:
        return s - 1 if self.overlapping else s

    def classifier_count(self, s: int) -> int:
        return self.stripe_rows(s) * len(self.resolutions)


class RunConfig(BaseModel):
    """All hyperparameters of a run. Defaults are the full-scale Market-1501 setup."""

    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    seed: int = 0
    setting: AblationSetting = AblationSetting.IV

    # architecture
    s: int = Field(6, ge=2)
    backbone: Literal["toy", "features"] = "toy"
    feature_manifest: Optional[str] = None
    input_height: int = Field(48, gt=0)
    input_width: int = Field(24, gt=0)
    stem_channels: int = Field(16, gt=0)
    c3: int = Field(32, gt=0)
    c4: int = Field(64, gt=0)
    fc_init_std: float = Field(0.001, ge=0.0)
    bn_momentum: float = Field(0.1, gt=0.0, le=1.0)
    bn_eps: float = Field(1e-5, gt=0.0)

    # losses
    alpha: float = Field(0.3, ge=0.0)
    beta: float = Field(0.0005, ge=0.0)
    epsilon: float = Field(0.1, ge=0.0, lt=1.0)
    center_update_rate: float = Field(0.5, gt=0.0, le=1.0)

    # optimization
    base_lr: float = Field(0.001, gt=0.0)
    warmup_epochs: int = Field(10, ge=0)
    warmup_coefficient: float = Field(0.01, gt=0.0, le=1.0)
    decay_factor: float = Field(0.1, gt=0.0, le=1.0)
    decay_period: int = Field(30, gt=0)
    adam_beta1: float = Field(0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    weight_decay: float = Field(0.0, ge=0.0)
    P: int = Field(32, ge=2)
    K: int = Field(4, ge=1)
    epochs: int = Field(120, ge=0)
    eval_every: int = Field(10, ge=0)

    # augmentation
    augment: bool = True
    pad: int = Field(10, ge=0)
    flip_prob: float = Field(0.5, ge=0.0, le=1.0)
    erase_prob: float = Field(0.5, ge=0.0, le=1.0)
    erase_area_min: float = Field(0.02, gt=0.0, le=1.0)
    erase_area_max: float = Field(0.4, gt=0.0, le=1.0)
    erase_aspect_min: float = Field(0.3, gt=0.0, le=1.0)

    # evaluation
    metric: Literal["l2", "cosine"] = "l2"
    protocol_filter: bool = True
    max_rank: int = Field(50, ge=10)

    # data
    dataset: Literal["synthetic", "market"] = "synthetic"
    data_root: str = "data/synthetic"
    num_identities: int = Field(20, ge=2)
    images_per_identity: int = Field(12, ge=1)
    num_cameras: int = Field(3, ge=1)
    noise_level: float = Field(0.1, ge=0.0)

    out_dir: str = "runs/default"

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunConfig":
        if self.erase_area_min > self.erase_area_max:
            raise ValueError("erase_area_min must not exceed erase_area_max")
        if self.backbone == "features" and not self.feature_manifest:
            raise ValueError("backbone=features requires feature_manifest")
        return self

    @property
    def batch_size(self) -> int:
        return self.P * self.K

    def descriptor_dim(self) -> int:
        rows = self.setting.stripe_rows(self.s)
        channels = {3: self.c3, 4: self.c4}
        return sum(rows * channels[r] for r in self.setting.resolutions)

    def fingerprint(self) -> str:
        """Content hash of every result-affecting field."""
        payload = {k: v for k, v in self.model_dump(mode="json").items() if k not in _UNFINGERPRINTED}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        return build_config({**self.model_dump(), **{k: v for k, v in overrides.items() if v is not None}})


def build_config(values: Dict[str, Any]) -> RunConfig:
    if "setting" in values and values["setting"] is not None:
        values = {**values, "setting": AblationSetting.parse(values["setting"])}
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration: {e}") from e


def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> RunConfig:
    """
    Load a flat key-value YAML config and apply overrides.

    Args:
        path: Config file; ``None`` means pure defaults
        **overrides: Values that win over the file (``None`` entries ignored)

    Returns:
        Validated, frozen configuration
    """
    values: Dict[str, Any] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigurationError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                loaded = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigurationError(f"cannot parse config {path}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"config {path} must be a flat key-value mapping")
        nested = [k for k, v in loaded.items() if isinstance(v, (dict, list))]
        if nested:
            raise ConfigurationError(f"config {path} must be flat; nested keys: {nested}")
        values.update(loaded)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(values)
