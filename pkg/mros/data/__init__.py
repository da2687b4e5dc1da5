"""Datasets, sampling and augmentation."""

from mros.data.records import DatasetSplit, ImageRecord, JUNK_IDENTITY, read_identity_map, write_identity_map
from mros.data.market import format_market_filename, load_market, parse_market_filename
from mros.data.synthetic import SyntheticDataset, SyntheticSpec, generate_synthetic, load_synthetic
from mros.data.sampler import PKBatch, PKSampler, pk_sample
from mros.data.augment import AugmentConfig, IMAGENET_MEAN, IMAGENET_STD, augment, normalize, random_erase
from mros.data.images import load_image, save_png
from mros.data.loader import BatchLoader, worker_count
from mros.data.datasets import open_dataset, synthetic_spec

__all__ = [
    'ImageRecord',
    'DatasetSplit',
    'JUNK_IDENTITY',
    'read_identity_map',
    'write_identity_map',

    # Market-1501
    'parse_market_filename',
    'format_market_filename',
    'load_market',

    # synthetic data
    'SyntheticSpec',
    'SyntheticDataset',
    'generate_synthetic',
    'load_synthetic',

    # sampling and augmentation
    'PKBatch',
    'PKSampler',
    'pk_sample',
    'AugmentConfig',
    'IMAGENET_MEAN',
    'IMAGENET_STD',
    'augment',
    'normalize',
    'random_erase',

    # loading
    'load_image',
    'save_png',
    'BatchLoader',
    'worker_count',
    'open_dataset',
    'synthetic_spec',
]
