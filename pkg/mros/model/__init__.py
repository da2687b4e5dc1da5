"""Multi-resolution overlapping-stripe model."""

from mros.model.pooling import StripeFeatures, partition_stripes, overlap_pool, non_overlap_pool
from mros.model.backbone import BackboneOutput, Backbone, ToyBackbone, FeatureFileBackbone, build_backbone
from mros.model.head import HeadParams, HeadOutput, StripeHead, forward_head, build_descriptor
from mros.model.network import MROSNetwork

__all__ = [
    'StripeFeatures',
    'partition_stripes',
    'overlap_pool',
    'non_overlap_pool',
    'BackboneOutput',
    'Backbone',
    'ToyBackbone',
    'FeatureFileBackbone',
    'build_backbone',
    'HeadParams',
    'HeadOutput',
    'StripeHead',
    'forward_head',
    'build_descriptor',
    'MROSNetwork',
]
