import math

import numpy as np
import pytest

from mros.autodiff import Tensor
from mros.errors import (
    ConfigurationError,
    ContractError,
    DegenerateBatchError,
    MissingCenterError,
    TrainingDivergenceError,
)
from mros.losses import (
    BatchEmbedding,
    ClassCenters,
    LossWeights,
    center_loss,
    cross_entropy_ls,
    mine_hardest,
    smoothed_targets,
    total_cross_entropy,
    total_loss,
    triplet_batch_hard,
    update_centers,
)
from tests.conftest import gradient_check


def batch(values, labels, requires_grad=False):
    G = np.asarray(values, dtype=np.float64)
    if G.ndim == 1:
        G = G[:, None]
    return BatchEmbedding(Tensor(G, requires_grad=requires_grad), np.asarray(labels))


def brute_force_triplet(G, labels, alpha):
    total = 0.0
    for a in range(len(G)):
        pos = max(math.sqrt(((G[a] - G[p]) ** 2).sum()) for p in range(len(G)) if labels[p] == labels[a])
        neg = min(math.sqrt(((G[a] - G[n]) ** 2).sum()) for n in range(len(G)) if labels[n] != labels[a])
        total += max(0.0, alpha + pos - neg)
    return total


def random_pk(rng, P, K, D):
    labels = np.repeat(np.arange(P), K)
    return rng.normal(size=(P * K, D)), labels


class TestTriplet:
    def test_separated_identities(self):
        assert triplet_batch_hard(batch([0, 1, 10, 11], [0, 0, 1, 1]), 0.3).item() == 0.0

    def test_overlapping_identities(self):
        loss = triplet_batch_hard(batch([0, 1, 0.5, 2], [0, 0, 1, 1]), 0.3).item()
        assert loss == pytest.approx(3.7, abs=1e-12)

    def test_identical_embeddings(self):
        loss = triplet_batch_hard(batch(np.ones((6, 3)), [0, 0, 1, 1, 2, 2]), 0.3).item()
        assert loss == pytest.approx(6 * 0.3)

    def test_matches_brute_force(self, rng):
        for _ in range(100):
            P, K, D = rng.integers(2, 5), rng.integers(1, 5), rng.integers(1, 9)
            G, labels = random_pk(rng, P, K, D)
            loss = triplet_batch_hard(batch(G, labels), 0.3).item()
            assert loss == pytest.approx(brute_force_triplet(G, labels, 0.3), rel=1e-12, abs=1e-12)

    def test_permutation_invariance(self, rng):
        G, labels = random_pk(rng, 4, 3, 5)
        perm = rng.permutation(len(G))
        a = triplet_batch_hard(batch(G, labels), 0.3).item()
        b = triplet_batch_hard(batch(G[perm], labels[perm]), 0.3).item()
        assert a == pytest.approx(b, abs=1e-12)

    def test_rigid_motion_invariance(self, rng):
        G, labels = random_pk(rng, 3, 4, 4)
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        moved = G @ q + rng.normal(size=4)
        a = triplet_batch_hard(batch(G, labels), 0.3).item()
        b = triplet_batch_hard(batch(moved, labels), 0.3).item()
        assert a == pytest.approx(b, abs=1e-9)

    def test_anchor_in_positive_set_with_single_sample(self):
        pos, neg = mine_hardest(np.array([[0.0], [5.0]]), np.array([0, 1]))
        np.testing.assert_array_equal(pos, [0, 1])
        np.testing.assert_array_equal(neg, [1, 0])

    def test_single_identity_is_degenerate(self):
        with pytest.raises(DegenerateBatchError):
            triplet_batch_hard(batch([0, 1, 2], [0, 0, 0]), 0.3)

    def test_empty_batch(self):
        with pytest.raises(ContractError):
            triplet_batch_hard(BatchEmbedding(Tensor(np.zeros((0, 2))), np.zeros(0)), 0.3)

    def test_gradient(self, rng):
        checked = 0
        while checked < 20:
            G, labels = random_pk(rng, 2, 2, 3)
            G *= 2.0
            pos, neg = mine_hardest(G, labels)
            d = np.sqrt(((G[:, None] - G[None]) ** 2).sum(axis=2))
            margins = 0.3 + d[np.arange(4), pos] - d[np.arange(4), neg]
            # keep clear of hinge kinks and mining ties
            sorted_d = np.sort(d[np.triu_indices(4, 1)])
            if np.abs(margins).min() < 0.05 or np.diff(sorted_d).min() < 0.01:
                continue
            b = batch(G, labels, requires_grad=True)
            gradient_check(lambda: triplet_batch_hard(b, 0.3), [b.G])
            checked += 1


class TestCenter:
    def test_zero_at_centers(self):
        centers = ClassCenters(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert center_loss(batch([[1, 2], [3, 4]], [0, 1]), centers).item() == 0.0

    def test_half_squared_distance(self):
        assert center_loss(batch([2.0], [0]), ClassCenters(np.array([[1.0]]))).item() == pytest.approx(0.5)

    def test_matches_direct_summation(self, rng):
        G = rng.normal(size=(8, 4))
        labels = rng.integers(0, 3, size=8)
        c = rng.normal(size=(3, 4))
        expected = 0.5 * sum(((G[i] - c[labels[i]]) ** 2).sum() for i in range(8))
        assert center_loss(batch(G, labels), ClassCenters(c)).item() == pytest.approx(expected, abs=1e-12)

    def test_unknown_label(self):
        with pytest.raises(MissingCenterError):
            center_loss(batch([1.0, 2.0], [0, 5]), ClassCenters.zeros(2, 1))

    def test_gradient(self, rng):
        for _ in range(20):
            b = batch(rng.normal(size=(6, 3)), [0, 0, 1, 1, 2, 2], requires_grad=True)
            centers = ClassCenters(rng.normal(size=(3, 3)))
            gradient_check(lambda: center_loss(b, centers), [b.G])

    def test_update_rule(self):
        centers = ClassCenters(np.array([[0.0], [7.0]]), update_rate=0.5)
        update_centers(batch([2.0], [0]), centers)
        np.testing.assert_allclose(centers.c, [[0.5], [7.0]])

    def test_sample_at_center_leaves_it(self):
        centers = ClassCenters(np.array([[3.0, 1.0]]))
        update_centers(batch([[3.0, 1.0]], [0]), centers)
        np.testing.assert_array_equal(centers.c, [[3.0, 1.0]])

    def test_repeated_updates_approach_class_mean(self, rng):
        G = rng.normal(size=(6, 2))
        labels = np.array([0, 0, 0, 1, 1, 1])
        centers = ClassCenters(rng.normal(size=(2, 2)) * 5.0, update_rate=0.5)
        means = np.stack([G[labels == j].mean(axis=0) for j in (0, 1)])
        previous = np.linalg.norm(centers.c - means, axis=1)
        for _ in range(100):
            update_centers(batch(G, labels), centers)
            current = np.linalg.norm(centers.c - means, axis=1)
            assert np.all(current <= previous + 1e-15)
            previous = current
        assert previous.max() < 1e-6


class TestCrossEntropy:
    def test_uniform_logits(self):
        for epsilon in (0.0, 0.1, 0.5):
            assert cross_entropy_ls(Tensor(np.zeros(5)), 2, epsilon).item() == pytest.approx(math.log(5))

    def test_hand_softmax(self):
        loss = cross_entropy_ls(Tensor([0.0, math.log(3.0)]), 1, 0.0).item()
        assert loss == pytest.approx(-math.log(0.75), abs=1e-12)
        assert loss == pytest.approx(0.28768, abs=1e-5)

    def test_shift_invariance(self, rng):
        logits = rng.normal(size=6)
        a = cross_entropy_ls(Tensor(logits), 3, 0.1).item()
        b = cross_entropy_ls(Tensor(logits + 17.5), 3, 0.1).item()
        assert a == pytest.approx(b, abs=1e-12)

    def test_minimum_is_target_entropy(self, rng):
        q = smoothed_targets(np.array([1]), 4, 0.1)[0]
        entropy = -(q * np.log(q)).sum()
        optimum = Tensor(np.log(q), requires_grad=True)
        loss = cross_entropy_ls(optimum, 1, 0.1)
        assert loss.item() == pytest.approx(entropy, abs=1e-12)
        loss.backward()
        np.testing.assert_allclose(optimum.grad, 0.0, atol=1e-12)
        for _ in range(20):
            assert cross_entropy_ls(Tensor(rng.normal(size=4) * 3), 1, 0.1).item() >= entropy - 1e-12

    def test_label_out_of_range(self):
        with pytest.raises(ContractError):
            cross_entropy_ls(Tensor(np.zeros(3)), 3, 0.1)

    def test_gradient(self, rng):
        for _ in range(20):
            logits = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
            labels = rng.integers(0, 5, size=4)
            gradient_check(lambda: cross_entropy_ls(logits, labels, 0.1), [logits])

    def test_mean_over_stripes(self):
        logits = [Tensor(np.zeros((2, 4))) for _ in range(10)]
        value = total_cross_entropy(logits, np.array([0, 1]), 0.1, expected_count=10).item()
        assert value == pytest.approx(math.log(4))

    def test_divisor_is_stripe_count(self, rng):
        sets = [Tensor(rng.normal(size=(3, 5))) for _ in range(10)]
        labels = np.array([0, 2, 4])
        oracle = 0.0
        for logits in sets:
            for row, label in zip(logits.data, labels):
                shifted = row - row.max()
                log_probs = shifted - np.log(np.exp(shifted).sum())
                q = np.full(5, 0.1 / 5)
                q[label] += 0.9
                oracle += -(q * log_probs).sum() / 3
        oracle /= 10
        assert total_cross_entropy(sets, labels, 0.1, expected_count=10).item() == pytest.approx(oracle, abs=1e-12)

    def test_wrong_stripe_count(self):
        with pytest.raises(ConfigurationError):
            total_cross_entropy([Tensor(np.zeros((2, 3)))] * 9, np.array([0, 1]), 0.1, expected_count=10)


class TestTotal:
    def parts(self, triplet, center, cross):
        return {"triplet": Tensor(triplet), "center": Tensor(center), "cross": Tensor(cross)}

    def test_weighted_sum(self):
        total = total_loss(self.parts(1.0, 2.0, 3.0), LossWeights(beta=0.0005)).item()
        assert total == pytest.approx(4.001, abs=1e-12)

    def test_zero_beta(self):
        assert total_loss(self.parts(1.5, 9.0, 2.25), LossWeights(beta=0.0)).item() == 3.75

    def test_all_zero(self):
        assert total_loss(self.parts(0.0, 0.0, 0.0), LossWeights()).item() == 0.0

    def test_gradient_is_weighted_sum(self):
        x = Tensor(np.array(2.0), requires_grad=True)
        total_loss({"triplet": x * 1.0, "center": x * x, "cross": x * 3.0}, LossWeights(beta=0.5)).backward()
        assert x.grad == pytest.approx(1.0 + 0.5 * 4.0 + 3.0)

    def test_non_finite_part_is_named(self):
        with pytest.raises(TrainingDivergenceError) as info:
            total_loss(self.parts(1.0, float("nan"), 1.0), LossWeights())
        assert info.value.part == "center"
