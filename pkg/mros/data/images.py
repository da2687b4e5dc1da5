"""
Image decode/encode through Pillow. Arrays are ``3 x H x W`` float64 in [0, 1].
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from mros.errors import DataError


def load_image(path: Union[str, Path], height: Optional[int] = None, width: Optional[int] = None) -> np.ndarray:
    """Decode a JPEG/PNG, optionally resizing to ``height x width``."""
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            if height is not None and width is not None and img.size != (width, height):
                img = img.resize((width, height), Image.BILINEAR)
            array = np.asarray(img, dtype=np.float64) / 255.0
    except (OSError, ValueError) as e:
        raise DataError(f"cannot decode image {path}: {e}") from e
    return array.transpose(2, 0, 1).copy()


def to_uint8(image: np.ndarray) -> np.ndarray:
    """``3 x H x W`` float in [0, 1] -> ``H x W x 3`` uint8."""
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)


def save_png(path: Union[str, Path], image: np.ndarray) -> None:
    Image.fromarray(to_uint8(image)).save(path, format="PNG")
