import numpy as np
import pytest

from mros.errors import ContractError, DimensionError, EmptyEvaluationError, FormatError
from mros.evaluation import (
    EmbeddingSet,
    RankingResult,
    average_precision,
    cmc,
    distance_matrix,
    evaluate,
    first_hit,
    load_embeddings,
    protocol_filter,
    rank_gallery,
    save_embeddings,
    write_report,
)
from mros.tools import read_csv


def embeddings(descriptors, identities, cameras=None):
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.ndim == 1:
        descriptors = descriptors[:, None]
    cameras = cameras if cameras is not None else [1] * len(identities)
    return EmbeddingSet(descriptors, identities, cameras)


def ranking(relevant, valid=None):
    relevant = np.asarray(relevant, dtype=bool)
    valid = np.ones_like(relevant) if valid is None else np.asarray(valid, dtype=bool)
    return RankingResult(order=np.arange(relevant.size), relevant=relevant, valid=valid)


def three_query_fixture():
    """
    1-D descriptors; query 0 sees ids in rank order A, B, A, B (AP 5/6),
    query 1 sees its match first (AP 1), query 2 at rank 2 (AP 1/2).
    """
    gallery = embeddings([1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 21.0], [0, 1, 0, 1, 5, 7, 8], [2, 2, 2, 2, 2, 2, 2])
    query = embeddings([0.0, 10.0, 21.5], [0, 5, 7], [1, 1, 1])
    return query, gallery


class TestDistances:
    def test_identical_vectors(self):
        x = embeddings([[1.0, 2.0, 3.0]], [0])
        assert distance_matrix(x, x)[0, 0] == 0.0

    def test_one_dimensional(self):
        d = distance_matrix(embeddings([0.0], [0]), embeddings([3.0, -4.0], [1, 2]))
        np.testing.assert_array_equal(d, [[3.0, 4.0]])

    def test_matches_double_loop(self, rng):
        q = embeddings(rng.normal(size=(5, 8)), range(5))
        g = embeddings(rng.normal(size=(7, 8)), range(7))
        d = distance_matrix(q, g)
        for i in range(5):
            for j in range(7):
                expected = np.sqrt(sum((q.descriptors[i, k] - g.descriptors[j, k]) ** 2 for k in range(8)))
                assert abs(d[i, j] - expected) < 1e-10

    def test_gram_form_agrees(self, rng, monkeypatch):
        import mros.evaluation.metrics as metrics

        q = embeddings(rng.normal(size=(6, 4)), range(6))
        g = embeddings(rng.normal(size=(9, 4)), range(9))
        exact = distance_matrix(q, g)
        monkeypatch.setattr(metrics, "_EXACT_L2_BUDGET", 0)
        np.testing.assert_allclose(distance_matrix(q, g), exact, atol=1e-10)

    def test_cosine(self):
        q = embeddings([[1.0, 0.0], [0.0, 0.0]], [0, 1])
        g = embeddings([[2.0, 0.0], [0.0, 3.0], [-1.0, 0.0]], [0, 1, 2])
        np.testing.assert_allclose(distance_matrix(q, g, "cosine"), [[0.0, 1.0, 2.0], [1.0, 1.0, 1.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError, match="3-d.*2-d"):
            distance_matrix(embeddings(np.zeros((1, 3)), [0]), embeddings(np.zeros((1, 2)), [0]))

    def test_unknown_metric(self):
        x = embeddings([1.0], [0])
        with pytest.raises(ContractError):
            distance_matrix(x, x, "manhattan")


class TestProtocol:
    def test_validity_flags(self):
        gallery = embeddings(np.zeros(4), [3, 3, -1, 4], [2, 1, 2, 1])
        np.testing.assert_array_equal(protocol_filter(3, 1, gallery), [True, False, False, True])

    def test_junk_invalid_on_any_camera(self):
        gallery = embeddings(np.zeros(3), [-1, -1, -1], [1, 2, 3])
        assert not protocol_filter(0, 4, gallery).any()

    def test_ties_go_to_lower_index(self):
        gallery = embeddings(np.zeros(4), [1, 2, 3, 4])
        result = rank_gallery(np.array([1.0, 0.5, 1.0, 0.5]), 3, 9, gallery)
        np.testing.assert_array_equal(result.order, [1, 3, 0, 2])


class TestAveragePrecision:
    def test_single_hit_at_top(self):
        assert average_precision(ranking([1, 0, 0])) == 1.0

    def test_hits_at_one_and_three(self):
        assert average_precision(ranking([1, 0, 1, 0])) == pytest.approx(5.0 / 6.0)

    def test_all_relevant_on_top(self):
        assert average_precision(ranking([1, 1, 1, 0, 0])) == 1.0

    def test_invalid_entries_are_skipped(self):
        # the invalid entry at position 1 does not count toward the rank
        assert average_precision(ranking([0, 1, 1], [False, True, True])) == 1.0

    def test_no_relevant(self):
        with pytest.raises(ContractError):
            average_precision(ranking([0, 0, 0]))

    def test_one_exactly_when_relevant_precede_irrelevant(self, rng):
        perfect = 0
        for _ in range(500):
            n = int(rng.integers(1, 12))
            relevant = rng.random(n) < 0.4
            relevant[rng.integers(0, n)] = True
            if rng.random() < 0.3:
                relevant = np.sort(relevant)[::-1]
            valid = rng.random(n) < 0.8
            valid[np.flatnonzero(relevant)[0]] = True
            r = ranking(relevant, valid)
            hits = list(r.hits)
            last_hit = max(i for i, hit in enumerate(hits) if hit)
            separated = all(hits[: last_hit + 1])
            assert (average_precision(r) == 1.0) == separated
            perfect += separated
        assert 0 < perfect < 500


class TestCMC:
    def test_first_hit_at_four(self):
        curve = cmc([ranking([0, 0, 0, 1, 0])], max_rank=10)
        assert curve[0] == 0.0 and curve[4] == 1.0 and curve[9] == 1.0
        assert curve[2] == 0.0 and curve[3] == 1.0

    def test_all_top_one(self):
        assert cmc([ranking([1, 0]), ranking([1, 1])], max_rank=10)[0] == 1.0

    def test_matches_brute_force(self, rng):
        rankings = []
        for _ in range(200):
            n = int(rng.integers(1, 30))
            relevant = rng.random(n) < 0.2
            relevant[rng.integers(0, n)] = True
            rankings.append(ranking(relevant, rng.random(n) < 0.8 if rng.random() < 0.5 else None))
        rankings = [r for r in rankings if r.has_match]
        curve = cmc(rankings, max_rank=20)
        for k in range(1, 21):
            oracle = 0
            for r in rankings:
                valid_positions = [i for i in range(len(r.relevant)) if r.valid[i]]
                hit = next(pos for pos, i in enumerate(valid_positions) if r.relevant[i])
                oracle += hit < k
            assert curve[k - 1] == oracle / len(rankings)
        assert np.all(np.diff(curve) >= 0)

        for r in rankings:
            labels = [bool(r.relevant[i]) for i in range(len(r.relevant)) if r.valid[i]]
            found, precisions = 0, []
            for position, hit in enumerate(labels, start=1):
                if hit:
                    found += 1
                    precisions.append(found / position)
            assert average_precision(r) == pytest.approx(sum(precisions) / len(precisions), abs=1e-12)

    def test_first_hit_without_match(self):
        with pytest.raises(ContractError):
            first_hit(ranking([0, 0]))

    def test_empty(self):
        with pytest.raises(EmptyEvaluationError):
            cmc([], max_rank=10)


class TestEvaluate:
    def test_matches_brute_force_end_to_end(self, rng):
        checked = 0
        for _ in range(200):
            nq, ng = int(rng.integers(1, 6)), int(rng.integers(1, 31))
            # small integer descriptors make equal distances common
            q_desc = rng.integers(0, 3, size=(nq, 2)).astype(np.float64)
            g_desc = rng.integers(0, 3, size=(ng, 2)).astype(np.float64)
            q_ids, q_cams = rng.integers(0, 4, size=nq), rng.integers(1, 3, size=nq)
            g_ids, g_cams = rng.integers(-1, 4, size=ng), rng.integers(1, 3, size=ng)

            aps, first_hits = [], []
            for i in range(nq):
                squared = [float(np.sum((q_desc[i] - g_desc[j]) ** 2)) for j in range(ng)]
                order = sorted(range(ng), key=lambda j: (squared[j], j))
                kept = [
                    j for j in order
                    if g_ids[j] != -1 and not (g_ids[j] == q_ids[i] and g_cams[j] == q_cams[i])
                ]
                labels = [g_ids[j] == q_ids[i] for j in kept]
                if not any(labels):
                    continue
                found, precisions = 0, []
                for position, hit in enumerate(labels, start=1):
                    if hit:
                        found += 1
                        precisions.append(found / position)
                aps.append(sum(precisions) / found)
                first_hits.append(labels.index(True))

            query = EmbeddingSet(q_desc, q_ids, q_cams)
            gallery = EmbeddingSet(g_desc, g_ids, g_cams)
            if not aps:
                with pytest.raises(EmptyEvaluationError):
                    evaluate(query, gallery, max_rank=10)
                continue
            report = evaluate(query, gallery, max_rank=30)
            np.testing.assert_allclose(report.average_precisions, aps, rtol=0.0, atol=1e-12)
            assert report.skipped == nq - len(aps)
            for k in range(1, 31):
                assert report.cmc[k - 1] == pytest.approx(sum(h < k for h in first_hits) / len(aps), abs=1e-12)
            checked += 1
        assert checked > 100

    def test_three_query_fixture(self):
        query, gallery = three_query_fixture()
        report = evaluate(query, gallery, max_rank=10)
        np.testing.assert_allclose(report.average_precisions, [5.0 / 6.0, 1.0, 0.5])
        assert report.mAP == pytest.approx((5.0 / 6.0 + 1.0 + 0.5) / 3.0)
        assert report.rank1 == pytest.approx(2.0 / 3.0)
        assert report.rank5 == 1.0 and report.rank10 == 1.0
        assert report.num_queries == 3 and report.skipped == 0

    def test_self_retrieval(self, rng):
        ids = np.repeat(np.arange(5), 2)
        x = embeddings(rng.normal(size=(10, 6)), ids)
        report = evaluate(x, x, apply_protocol=False, max_rank=10)
        assert report.rank1 == 1.0
        assert 0.5 <= report.mAP <= 1.0

    def test_protocol_removes_self_matches(self):
        x = embeddings([0.0, 5.0], [0, 1], [1, 1])
        with pytest.raises(EmptyEvaluationError):
            evaluate(x, x, max_rank=10)

    def test_unmatched_queries_are_skipped(self):
        query, gallery = three_query_fixture()
        extra = embeddings(np.append(query.descriptors[:, 0], 0.0), [0, 5, 7, 99], [1, 1, 1, 1])
        report = evaluate(extra, gallery, max_rank=10)
        assert report.skipped == 1 and report.num_queries == 3
        assert report.mAP == pytest.approx((5.0 / 6.0 + 1.0 + 0.5) / 3.0)

    def test_workers_do_not_change_result(self, rng):
        q = embeddings(rng.normal(size=(13, 4)), rng.integers(0, 4, size=13), np.ones(13, dtype=int))
        g = embeddings(rng.normal(size=(30, 4)), np.arange(30) % 4, np.full(30, 2))
        a = evaluate(q, g, max_rank=10, workers=1)
        b = evaluate(q, g, max_rank=10, workers=4)
        assert a.average_precisions == b.average_precisions
        np.testing.assert_array_equal(a.cmc, b.cmc)

    def test_monotone_transform_invariance(self, rng):
        q = embeddings(rng.normal(size=(8, 5)), np.arange(8) % 4, np.ones(8, dtype=int))
        g = embeddings(rng.normal(size=(16, 5)), np.arange(16) % 4, np.full(16, 2))
        base = evaluate(q, g, max_rank=10)
        scaled = evaluate(
            embeddings(q.descriptors * 3.0 + 1.0, q.identities, q.cameras),
            embeddings(g.descriptors * 3.0 + 1.0, g.identities, g.cameras),
            max_rank=10,
        )
        np.testing.assert_allclose(scaled.average_precisions, base.average_precisions)

    def test_cosine_equals_l2_on_unit_vectors(self, rng):
        def unit(n):
            x = rng.normal(size=(n, 6))
            return x / np.linalg.norm(x, axis=1, keepdims=True)

        q = embeddings(unit(6), np.arange(6) % 3, np.ones(6, dtype=int))
        g = embeddings(unit(12), np.arange(12) % 3, np.full(12, 2))
        a = evaluate(q, g, metric="l2", max_rank=10)
        b = evaluate(q, g, metric="cosine", max_rank=10)
        np.testing.assert_allclose(a.average_precisions, b.average_precisions)
        np.testing.assert_array_equal(a.cmc, b.cmc)

    def test_duplicating_gallery_keeps_rank1(self, rng):
        q = embeddings(rng.normal(size=(6, 3)), np.arange(6) % 3, np.ones(6, dtype=int))
        g = embeddings(rng.normal(size=(9, 3)), np.arange(9) % 3, np.full(9, 2))
        doubled = embeddings(np.repeat(g.descriptors, 2, axis=0), np.repeat(g.identities, 2), np.repeat(g.cameras, 2))
        assert evaluate(q, g, max_rank=10).rank1 == evaluate(q, doubled, max_rank=10).rank1

    def test_random_descriptors_score_at_chance(self, rng):
        ids = np.arange(100)
        query = embeddings(rng.normal(size=(100, 16)), ids, np.full(100, 3))
        gallery = embeddings(rng.normal(size=(200, 16)), np.repeat(ids, 2), np.tile([1, 2], 100))
        report = evaluate(query, gallery, max_rank=10)

        relevance = np.zeros(200, dtype=bool)
        relevance[:2] = True
        chance = np.mean([average_precision(ranking(rng.permutation(relevance))) for _ in range(20000)])
        assert report.mAP == pytest.approx(chance, abs=0.03)
        assert 0.0 <= report.rank1 <= report.rank5 <= report.rank10 <= 1.0

    def test_empty_sets(self):
        x = embeddings([1.0], [0])
        empty = EmbeddingSet(np.zeros((0, 1)), [], [])
        with pytest.raises(EmptyEvaluationError):
            evaluate(empty, x)


class TestEmbeddingFiles:
    def test_round_trip(self, tmp_path, rng):
        original = EmbeddingSet(
            rng.normal(size=(4, 3)).astype(np.float32).astype(np.float64),
            [1, 2, 3, -1], [1, 1, 2, 3], ["a.png", "b.png", "c.png", "d.png"],
        )
        path = save_embeddings(tmp_path / "query.emb", original, fingerprint="abc")
        loaded = load_embeddings(path)
        np.testing.assert_array_equal(loaded.descriptors, original.descriptors)
        np.testing.assert_array_equal(loaded.identities, original.identities)
        np.testing.assert_array_equal(loaded.cameras, original.cameras)
        assert loaded.paths == original.paths

    def test_truncated_rows(self, tmp_path):
        path = save_embeddings(tmp_path / "x.emb", embeddings(np.ones((3, 2)), [0, 1, 2]))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_bad_magic(self, tmp_path):
        path = save_embeddings(tmp_path / "x.emb", embeddings(np.ones((1, 2)), [0]))
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_missing_sidecar(self, tmp_path):
        path = save_embeddings(tmp_path / "x.emb", embeddings(np.ones((1, 2)), [0]))
        (tmp_path / "x.emb.csv").unlink()
        with pytest.raises(FormatError):
            load_embeddings(path)


class TestReport:
    def test_writes_artifacts(self, tmp_path):
        query, gallery = three_query_fixture()
        report = evaluate(query, gallery, max_rank=10)
        paths = write_report(str(tmp_path), report, fingerprint="f00d")
        row = read_csv(paths["csv"])[0]
        assert float(row["mAP"]) == pytest.approx(report.mAP, abs=1e-6)
        assert len(read_csv(paths["cmc"])) == 10
        with open(paths["markdown"], encoding="utf-8") as f:
            markdown = f.read()
        assert "fingerprint=f00d" in markdown
        assert "84.2" in markdown
