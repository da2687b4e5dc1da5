"""
Dataset selection from a run configuration.
"""

from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from mros.config import RunConfig
from mros.data.market import load_market
from mros.data.records import DatasetSplit
from mros.data.synthetic import MANIFEST_NAME, SyntheticSpec, generate_synthetic, load_synthetic
from mros.utils.logging import get_logger

logger = get_logger("mros.data.datasets")


def synthetic_spec(config: RunConfig) -> SyntheticSpec:
    return SyntheticSpec(
        num_identities=config.num_identities,
        images_per_identity=config.images_per_identity,
        num_cameras=config.num_cameras,
        image_height=config.input_height,
        image_width=config.input_width,
        noise_level=config.noise_level,
        seed=config.seed,
    )


def open_dataset(config: RunConfig) -> Tuple[DatasetSplit, Optional[Dict[str, np.ndarray]]]:
    """
    Load the configured dataset.

    A synthetic dataset is read from ``data_root`` when a manifest exists
    there, otherwise rendered in memory from the config.

    Returns:
        The split and, for in-memory synthetic data, the images keyed by path
    """
    if config.dataset == "market":
        root = Path(config.data_root)
        return load_market(root, identity_map_path=None), None
    root = Path(config.data_root)
    if (root / MANIFEST_NAME).exists():
        logger.info(f"Loading synthetic dataset from {root}")
        return load_synthetic(root), None
    logger.info(f"No synthetic dataset at {root}; rendering in memory")
    dataset = generate_synthetic(synthetic_spec(config), K=config.K)
    return dataset.split, dataset.images
