"""Retrieval evaluation: distances, protocol filtering, AP and CMC."""

from mros.evaluation.metrics import (
    EmbeddingSet,
    EvalReport,
    RankingResult,
    average_precision,
    cmc,
    distance_matrix,
    evaluate,
    first_hit,
    protocol_filter,
    rank_gallery,
)
from mros.evaluation.embeddings import extract_embeddings, load_embeddings, save_embeddings
from mros.evaluation.report import REFERENCE_ROW, format_summary, write_report

__all__ = [
    'EmbeddingSet',
    'EvalReport',
    'RankingResult',
    'distance_matrix',
    'protocol_filter',
    'rank_gallery',
    'average_precision',
    'first_hit',
    'cmc',
    'evaluate',
    'extract_embeddings',
    'save_embeddings',
    'load_embeddings',
    'write_report',
    'format_summary',
    'REFERENCE_ROW',
]
