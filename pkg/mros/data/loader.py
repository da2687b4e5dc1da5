"""
Turns records into model inputs.

Image backbones get a normalized ``N x 3 x H x W`` tensor (augmented in
training); the feature backbone gets image ids. Decoding and augmentation
run in a thread pool; every image draws its own child seed up front so the
result does not depend on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from mros.autodiff import Tensor
from mros.config import RunConfig
from mros.data.augment import AugmentConfig, augment, normalize
from mros.data.images import load_image
from mros.data.records import ImageRecord
from mros.errors import DataError

DEFAULT_WORKERS = 2


def worker_count() -> int:
    """Thread-pool size from ``MROS_WORKERS``."""
    raw = os.getenv("MROS_WORKERS", str(DEFAULT_WORKERS))
    try:
        return max(1, int(raw))
    except ValueError:
        raise DataError(f"MROS_WORKERS must be an integer, got {raw!r}") from None


class BatchLoader:
    """Decode (with an in-memory cache), augment and stack images."""

    def __init__(
        self,
        config: RunConfig,
        images: Optional[Dict[str, np.ndarray]] = None,
        workers: Optional[int] = None,
        cache: bool = True,
    ):
        self.height = config.input_height
        self.width = config.input_width
        self.backbone = config.backbone
        self.augment_enabled = config.augment
        self.augment_config = AugmentConfig.from_run_config(config)
        self.workers = workers or worker_count()
        self.cache = cache
        self._images: Dict[str, np.ndarray] = dict(images or {})

    def image(self, record: ImageRecord) -> np.ndarray:
        cached = self._images.get(record.path)
        if cached is not None:
            return cached
        image = load_image(record.path, self.height, self.width)
        if image.shape != (3, self.height, self.width):
            raise DataError(f"{record.path} decoded to {image.shape}, expected 3x{self.height}x{self.width}")
        if self.cache:
            self._images[record.path] = image
        return image

    def _prepare(self, record: ImageRecord, seed: Optional[int]) -> np.ndarray:
        image = self.image(record)
        if seed is None:
            return normalize(image)
        return augment(image, np.random.default_rng(seed), self.augment_config)

    def load(
        self,
        records: Sequence[ImageRecord],
        rng: Optional[np.random.Generator] = None,
    ) -> Union[Tensor, List[str]]:
        """
        Model inputs for ``records``.

        Args:
            records: Records in batch order
            rng: Training-time randomness; ``None`` means no augmentation

        Returns:
            Stacked image tensor, or image ids for the feature backbone
        """
        if self.backbone == "features":
            return [r.image_id for r in records]
        if not records:
            raise DataError("cannot load an empty batch")
        if rng is not None and self.augment_enabled:
            seeds: List[Optional[int]] = [int(s) for s in rng.integers(0, 2**63 - 1, size=len(records))]
        else:
            seeds = [None] * len(records)
        if self.workers == 1:
            arrays = [self._prepare(r, s) for r, s in zip(records, seeds)]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                arrays = list(pool.map(self._prepare, records, seeds))
        return Tensor(np.stack(arrays, axis=0))
