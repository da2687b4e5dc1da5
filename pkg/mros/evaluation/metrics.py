"""
Single-query retrieval evaluation under the Market-1501 protocol.

For each query the gallery is ranked by ascending distance (ties broken by
lower gallery index). Gallery entries with the query's identity and camera
are removed, as are junk entries (identity -1); AP and CMC are computed on
the remaining valid entries only.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence

import numpy as np

from mros.data.records import JUNK_IDENTITY
from mros.errors import ContractError, DimensionError, EmptyEvaluationError
from mros.utils.logging import get_logger

logger = get_logger("mros.evaluation")

Metric = Literal["l2", "cosine"]

# above this many multiply-adds the L2 matrix switches to the Gram form
_EXACT_L2_BUDGET = 50_000_000


@dataclass
class EmbeddingSet:
    """Descriptors with aligned identity/camera labels."""

    descriptors: np.ndarray
    identities: np.ndarray
    cameras: np.ndarray
    paths: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.descriptors = np.atleast_2d(np.asarray(self.descriptors, dtype=np.float64))
        self.identities = np.asarray(self.identities, dtype=np.int64).reshape(-1)
        self.cameras = np.asarray(self.cameras, dtype=np.int64).reshape(-1)
        n = self.descriptors.shape[0]
        if self.identities.shape[0] != n or self.cameras.shape[0] != n:
            raise DimensionError(
                f"{n} descriptors but {self.identities.shape[0]} identities and {self.cameras.shape[0]} cameras"
            )
        if self.paths and len(self.paths) != n:
            raise DimensionError(f"{n} descriptors but {len(self.paths)} source paths")

    def __len__(self) -> int:
        return self.descriptors.shape[0]

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]


def distance_matrix(query: EmbeddingSet, gallery: EmbeddingSet, metric: Metric = "l2") -> np.ndarray:
    """
    Pairwise ``nq x ng`` distances.

    ``l2`` is the Euclidean distance, ``cosine`` is ``1 - cos(q, g)`` (zero
    vectors get distance 1).

    Raises:
        DimensionError: descriptor dimensions differ
    """
    if query.dim != gallery.dim:
        raise DimensionError(f"query descriptors are {query.dim}-d, gallery descriptors {gallery.dim}-d")
    q, g = query.descriptors, gallery.descriptors
    if metric == "l2":
        if q.shape[0] * g.shape[0] * q.shape[1] <= _EXACT_L2_BUDGET:
            return np.sqrt(((q[:, None, :] - g[None, :, :]) ** 2).sum(axis=2))
        sq = (q * q).sum(axis=1)[:, None] + (g * g).sum(axis=1)[None, :] - 2.0 * q @ g.T
        return np.sqrt(np.maximum(sq, 0.0))
    if metric == "cosine":
        qn = np.linalg.norm(q, axis=1)
        gn = np.linalg.norm(g, axis=1)
        denom = qn[:, None] * gn[None, :]
        sim = np.divide(q @ g.T, denom, out=np.zeros((q.shape[0], g.shape[0])), where=denom > 0)
        return 1.0 - sim
    raise ContractError(f"unknown metric {metric!r}; expected 'l2' or 'cosine'")


def protocol_filter(query_identity: int, query_camera: int, gallery: EmbeddingSet) -> np.ndarray:
    """Validity flag per gallery entry: same identity on the same camera and junk are invalid."""
    same_view = (gallery.identities == query_identity) & (gallery.cameras == query_camera)
    junk = gallery.identities == JUNK_IDENTITY
    return ~(same_view | junk)


@dataclass
class RankingResult:
    """
    One query's ranked gallery.

    order: gallery indices by ascending distance
    relevant: relevance flag per ranked position
    valid: validity flag per ranked position
    """

    order: np.ndarray
    relevant: np.ndarray
    valid: np.ndarray

    @property
    def hits(self) -> np.ndarray:
        """Relevance flags of the valid entries, in rank order."""
        return self.relevant[self.valid]

    @property
    def has_match(self) -> bool:
        return bool(self.hits.any())


def rank_gallery(
    distances: np.ndarray,
    query_identity: int,
    query_camera: int,
    gallery: EmbeddingSet,
    apply_protocol: bool = True,
) -> RankingResult:
    order = np.argsort(distances, kind="stable")
    if apply_protocol:
        valid = protocol_filter(query_identity, query_camera, gallery)
    else:
        valid = np.ones(len(gallery), dtype=bool)
    relevant = gallery.identities == query_identity
    return RankingResult(order=order, relevant=relevant[order], valid=valid[order])


def average_precision(ranking: RankingResult) -> float:
    """
    ``(1/R) * sum over hit positions k of precision@k`` on valid entries.

    Raises:
        ContractError: the ranking has no valid relevant entry
    """
    hits = ranking.hits
    num_relevant = int(hits.sum())
    if num_relevant == 0:
        raise ContractError("average precision needs at least one valid relevant gallery entry")
    positions = np.flatnonzero(hits) + 1
    precision_at_hits = np.arange(1, num_relevant + 1) / positions
    return float(precision_at_hits.mean())


def first_hit(ranking: RankingResult) -> int:
    """0-based position of the first valid relevant entry."""
    hits = np.flatnonzero(ranking.hits)
    if hits.size == 0:
        raise ContractError("ranking has no valid relevant gallery entry")
    return int(hits[0])


def cmc(rankings: Sequence[RankingResult], max_rank: int = 50) -> np.ndarray:
    """``curve[k-1]`` = fraction of queries whose first valid match is within the top ``k``."""
    if not rankings:
        raise EmptyEvaluationError("CMC needs at least one scored query")
    curve = np.zeros(max_rank, dtype=np.float64)
    for ranking in rankings:
        position = first_hit(ranking)
        if position < max_rank:
            curve[position:] += 1.0
    return curve / len(rankings)


@dataclass
class EvalReport:
    mAP: float
    rank1: float
    rank5: float
    rank10: float
    cmc: np.ndarray
    average_precisions: List[float]
    num_queries: int
    skipped: int = 0

    def as_dict(self) -> dict:
        return {
            "mAP": self.mAP,
            "rank1": self.rank1,
            "rank5": self.rank5,
            "rank10": self.rank10,
            "num_queries": self.num_queries,
            "skipped": self.skipped,
        }


def _rank_block(args):
    distances, query, gallery, start, apply_protocol = args
    return [
        rank_gallery(distances[i], int(query.identities[start + i]), int(query.cameras[start + i]), gallery, apply_protocol)
        for i in range(distances.shape[0])
    ]


def evaluate(
    query: EmbeddingSet,
    gallery: EmbeddingSet,
    metric: Metric = "l2",
    apply_protocol: bool = True,
    max_rank: int = 50,
    workers: int = 1,
) -> EvalReport:
    """
    mAP and CMC of ``query`` against ``gallery``.

    Args:
        query: Query descriptors
        gallery: Gallery descriptors
        metric: ``l2`` or ``cosine``
        apply_protocol: Drop same-identity-same-camera and junk entries
        max_rank: Length of the CMC curve
        workers: Threads ranking blocks of queries

    Returns:
        EvalReport over the queries that have at least one valid match

    Raises:
        EmptyEvaluationError: a set is empty or no query could be scored
    """
    if len(query) == 0 or len(gallery) == 0:
        raise EmptyEvaluationError(f"empty evaluation: {len(query)} queries, {len(gallery)} gallery entries")
    distances = distance_matrix(query, gallery, metric)

    block = max(1, int(np.ceil(len(query) / max(1, workers))))
    jobs = [(distances[s:s + block], query, gallery, s, apply_protocol) for s in range(0, len(query), block)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_rank_block, jobs))
    else:
        blocks = [_rank_block(job) for job in jobs]
    rankings = [r for b in blocks for r in b]

    scored = [r for r in rankings if r.has_match]
    skipped = len(rankings) - len(scored)
    if skipped:
        logger.warning(f"{skipped} of {len(rankings)} queries have no valid gallery match and are skipped")
    if not scored:
        raise EmptyEvaluationError("no query has a valid relevant gallery entry")

    aps = [average_precision(r) for r in scored]
    curve = cmc(scored, max_rank=max(max_rank, 10))
    return EvalReport(
        mAP=float(np.mean(aps)),
        rank1=float(curve[0]),
        rank5=float(curve[4]),
        rank10=float(curve[9]),
        cmc=curve,
        average_precisions=aps,
        num_queries=len(scored),
        skipped=skipped,
    )
