"""
Training-time augmentation chain.

Order: zero padding, random crop back to the input size, horizontal flip,
ImageNet normalization, random erasing. All randomness comes from the
supplied ``numpy.random.Generator``.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from mros.config import RunConfig

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406])
IMAGENET_STD = np.array([0.229, 0.224, 0.225])
ERASE_ATTEMPTS = 100

Box = Tuple[int, int, int, int]


@dataclass(frozen=True)
class AugmentConfig:
    pad: int = 10
    flip_prob: float = 0.5
    erase_prob: float = 0.5
    erase_area_min: float = 0.02
    erase_area_max: float = 0.4
    erase_aspect_min: float = 0.3

    @classmethod
    def from_run_config(cls, config: RunConfig) -> "AugmentConfig":
        return cls(
            pad=config.pad,
            flip_prob=config.flip_prob,
            erase_prob=config.erase_prob,
            erase_area_min=config.erase_area_min,
            erase_area_max=config.erase_area_max,
            erase_aspect_min=config.erase_aspect_min,
        )


def normalize(image: np.ndarray) -> np.ndarray:
    """Per-channel ``(x - mean) / std`` on a ``3 x H x W`` image."""
    return (image - IMAGENET_MEAN[:, None, None]) / IMAGENET_STD[:, None, None]


def pad_and_crop(image: np.ndarray, pad: int, rng: np.random.Generator) -> np.ndarray:
    if pad == 0:
        return image.copy()
    _, h, w = image.shape
    padded = np.pad(image, ((0, 0), (pad, pad), (pad, pad)))
    top = int(rng.integers(0, 2 * pad + 1))
    left = int(rng.integers(0, 2 * pad + 1))
    return padded[:, top:top + h, left:left + w]


def hflip(image: np.ndarray) -> np.ndarray:
    return image[:, :, ::-1].copy()


def random_erase(image: np.ndarray, rng: np.random.Generator, config: AugmentConfig) -> Tuple[np.ndarray, Optional[Box]]:
    """
    Fill one random rectangle of a normalized image with 0, the normalized
    ImageNet mean pixel.

    Area fraction is drawn from ``[erase_area_min, erase_area_max]`` and the
    aspect ratio from ``[r, 1/r]``; draws whose rounded rectangle does not
    fit or falls outside the area bounds are retried.

    Returns:
        The (possibly) erased image and the ``(top, left, height, width)``
        box, or ``None`` when no attempt succeeded
    """
    _, h, w = image.shape
    area = h * w
    for _ in range(ERASE_ATTEMPTS):
        target = rng.uniform(config.erase_area_min, config.erase_area_max) * area
        aspect = rng.uniform(config.erase_aspect_min, 1.0 / config.erase_aspect_min)
        eh = int(round(math.sqrt(target * aspect)))
        ew = int(round(math.sqrt(target / aspect)))
        if not (0 < eh < h and 0 < ew < w):
            continue
        if not config.erase_area_min <= eh * ew / area <= config.erase_area_max:
            continue
        top = int(rng.integers(0, h - eh + 1))
        left = int(rng.integers(0, w - ew + 1))
        out = image.copy()
        out[:, top:top + eh, left:left + ew] = 0.0
        return out, (top, left, eh, ew)
    return image, None


def augment(image: np.ndarray, rng: np.random.Generator, config: AugmentConfig) -> np.ndarray:
    """Run the full chain on one ``3 x H x W`` image in [0, 1]; shape is preserved."""
    out = pad_and_crop(image, config.pad, rng)
    if rng.random() < config.flip_prob:
        out = hflip(out)
    out = normalize(out)
    if rng.random() < config.erase_prob:
        out, _ = random_erase(out, rng, config)
    return out
