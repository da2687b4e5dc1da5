import os

import numpy as np
import pytest

from mros.autodiff import Tensor
from mros.data import BatchLoader, pk_sample
from mros.errors import ConfigurationError, FormatError, TrainingDivergenceError
from mros.losses import ClassCenters, LossWeights, total_loss
from mros.model import HeadOutput
from mros.tools import read_csv
from mros.training import (
    CHECKPOINT_NAME,
    DIVERGED_NAME,
    METRICS_NAME,
    LrSchedule,
    OptimizerState,
    TrainState,
    adam_step,
    compute_losses,
    fit,
    load_checkpoint,
    load_trained,
    loss_weights,
    lr_at_epoch,
    save_checkpoint,
    train_step,
)


class TestSchedule:
    @pytest.mark.parametrize("epoch,expected", [(0, 1e-5), (10, 1e-3), (40, 1e-4), (70, 1e-5)])
    def test_reference_points(self, epoch, expected):
        assert lr_at_epoch(epoch, LrSchedule()) == pytest.approx(expected, rel=1e-12)

    def test_warmup_is_linear_and_increasing(self):
        rates = [lr_at_epoch(e, LrSchedule()) for e in range(11)]
        assert all(a < b for a, b in zip(rates, rates[1:]))
        steps = np.diff(rates)
        np.testing.assert_allclose(steps, steps[0])

    def test_decay_is_non_increasing(self):
        rates = [lr_at_epoch(e, LrSchedule()) for e in range(10, 200)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_no_warmup(self):
        assert lr_at_epoch(0, LrSchedule(warmup_epochs=0)) == 1e-3

    def test_negative_epoch(self):
        with pytest.raises(ValueError):
            lr_at_epoch(-1, LrSchedule())


def param(values, grad):
    t = Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)
    t.grad = None if grad is None else np.asarray(grad, dtype=np.float64)
    return t


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        p = param([1.0, -2.0], [0.0, 0.0])
        adam_step({"p": p}, OptimizerState(), 0.1)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_missing_gradient_counts_as_zero(self):
        p = param([3.0], None)
        adam_step({"p": p}, OptimizerState(), 0.1)
        np.testing.assert_array_equal(p.data, [3.0])

    def test_first_step_moves_by_lr_against_sign(self):
        p = param([0.0, 0.0, 0.0], [2.0, -0.5, 1e-3])
        adam_step({"p": p}, OptimizerState(eps=0.0), 0.01)
        np.testing.assert_allclose(p.data, [-0.01, 0.01, -0.01])

    def test_constant_gradient_step_tends_to_lr(self):
        p = param([0.0], [4.0])
        state = OptimizerState()
        previous = 0.0
        for _ in range(2000):
            adam_step({"p": p}, state, 0.001)
            p.grad = np.array([4.0])
            step = previous - p.data[0]
            previous = p.data[0]
        assert step == pytest.approx(0.001, rel=1e-6)
        assert state.step == 2000

    def test_non_finite_gradient(self):
        a = param([1.0], [1.0])
        b = param([1.0], [np.inf])
        with pytest.raises(TrainingDivergenceError) as info:
            adam_step({"a": a, "b": b}, OptimizerState(), 0.1)
        assert info.value.part == "b"
        np.testing.assert_array_equal(a.data, [1.0])

    def test_weight_decay_adds_to_gradient(self):
        p = param([2.0], [0.0])
        adam_step({"p": p}, OptimizerState(weight_decay=0.5, eps=0.0), 0.01)
        np.testing.assert_allclose(p.data, [1.99])


class TestCheckpoint:
    def test_round_trip_is_exact(self, tmp_path, tiny_config, tiny_dataset):
        state = TrainState.initialize(tiny_config, tiny_dataset.split.num_classes)
        state.optimizer.m["x"] = np.array([1.0, 2.0])
        state.optimizer.v["x"] = np.array([3.0, 4.0])
        state.optimizer.step = 7
        state.epoch = 3
        state.rng.random(5)
        path = save_checkpoint(tmp_path / CHECKPOINT_NAME, state.to_checkpoint({"note": "x"}))

        ckpt = load_checkpoint(path)
        assert ckpt.epoch == 3 and ckpt.num_classes == 4
        assert ckpt.config == tiny_config
        assert ckpt.metadata == {"note": "x"}
        original = state.model.state_arrays()
        assert ckpt.model_state.keys() == original.keys()
        for name, array in original.items():
            np.testing.assert_array_equal(ckpt.model_state[name], array)
        for a, b in zip(ckpt.centers, state.centers):
            np.testing.assert_array_equal(a.c, b.c)
        assert ckpt.optimizer.step == 7
        np.testing.assert_array_equal(ckpt.optimizer.v["x"], [3.0, 4.0])

        restored = TrainState.from_checkpoint(ckpt)
        assert restored.rng.random() == state.rng.random()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mros"
        path.write_bytes(b"NOPE" + b"\0" * 20)
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "absent.mros")

    def test_incompatible_config(self, tmp_path, tiny_config, tiny_dataset):
        state = TrainState.initialize(tiny_config, tiny_dataset.split.num_classes)
        ckpt = load_checkpoint(save_checkpoint(tmp_path / CHECKPOINT_NAME, state.to_checkpoint()))
        with pytest.raises(ConfigurationError):
            TrainState.from_checkpoint(ckpt, tiny_config.with_overrides(alpha=0.5))
        TrainState.from_checkpoint(ckpt, tiny_config.with_overrides(epochs=5))


def fixed_batch(config, dataset, seed=0):
    batch = pk_sample(dataset.split.train, config.P, config.K, np.random.default_rng(seed))
    inputs = BatchLoader(config, dataset.images, workers=1).load(batch.records)
    return inputs, batch.labels


class TestTrainStep:
    def test_returns_finite_parts(self, tiny_config, tiny_dataset):
        state = TrainState.initialize(tiny_config, tiny_dataset.split.num_classes)
        inputs, labels = fixed_batch(tiny_config, tiny_dataset)
        losses = train_step(inputs, labels, state, loss_weights(tiny_config), 1e-3)
        assert set(losses) == {"triplet", "center", "cross", "total"}
        assert all(np.isfinite(v) for v in losses.values())
        assert state.optimizer.step == 1

    def test_zero_beta_with_inactive_triplet(self, rng):
        # hardest negative (4.9) lies beyond hardest positive (0.1) plus the margin
        G = Tensor(np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0], [5.1, 0.0]]), requires_grad=True)
        labels = np.array([0, 0, 1, 1])
        logits = [Tensor(rng.normal(size=(4, 2)), requires_grad=True) for _ in range(2)]
        output = HeadOutput(G=G, g={}, logits=logits, metric_features=[G])
        weights = LossWeights(alpha=0.3, beta=0.0, epsilon=0.1)
        parts = compute_losses(output, labels, [ClassCenters.zeros(2, 2)], weights)
        assert parts["triplet"].item() == 0.0
        assert parts["center"].item() > 0.0
        assert total_loss(parts, weights).item() == parts["cross"].item()

    def test_initial_cross_entropy_is_near_uniform(self, tiny_config, tiny_dataset):
        state = TrainState.initialize(tiny_config, tiny_dataset.split.num_classes)
        inputs, labels = fixed_batch(tiny_config, tiny_dataset)
        losses = train_step(inputs, labels, state, loss_weights(tiny_config), 1e-3)
        # FC weights start near zero
        assert losses["cross"] == pytest.approx(np.log(4), abs=0.05)

    def test_centers_move_toward_batch(self, tiny_config, tiny_dataset):
        state = TrainState.initialize(tiny_config, tiny_dataset.split.num_classes)
        inputs, labels = fixed_batch(tiny_config, tiny_dataset)
        before = state.centers[0].c.copy()
        train_step(inputs, labels, state, loss_weights(tiny_config), 1e-3)
        after = state.centers[0].c
        present = np.unique(labels)
        absent = [j for j in range(4) if j not in present]
        assert np.any(after[present] != before[present])
        np.testing.assert_array_equal(after[absent], before[absent])

    def test_deterministic(self, tiny_config, tiny_dataset):
        results = []
        for _ in range(2):
            state = TrainState.initialize(tiny_config, tiny_dataset.split.num_classes)
            inputs, labels = fixed_batch(tiny_config, tiny_dataset)
            losses = [train_step(inputs, labels, state, loss_weights(tiny_config), 1e-3) for _ in range(3)]
            results.append((losses, state.model.state_arrays()))
        assert results[0][0] == results[1][0]
        for name, array in results[0][1].items():
            np.testing.assert_array_equal(array, results[1][1][name])

    @pytest.mark.parametrize("setting", ["I", "II", "III", "IV"])
    def test_every_setting_trains(self, tiny_config, tiny_dataset, setting):
        config = tiny_config.with_overrides(setting=setting)
        state = TrainState.initialize(config, tiny_dataset.split.num_classes)
        inputs, labels = fixed_batch(config, tiny_dataset)
        losses = train_step(inputs, labels, state, loss_weights(config), 1e-3)
        assert np.isfinite(losses["total"])

    def test_overfits_fixed_batch(self, tiny_config, tiny_dataset):
        config = tiny_config.with_overrides(epsilon=0.0)
        state = TrainState.initialize(config, tiny_dataset.split.num_classes)
        inputs, labels = fixed_batch(config, tiny_dataset)
        weights = loss_weights(config)
        totals = [train_step(inputs, labels, state, weights, 0.01)["total"] for _ in range(100)]
        assert np.mean(totals[-5:]) < 0.5 * np.mean(totals[:5])

    def test_divergence_leaves_parameters(self, tiny_config, tiny_dataset):
        state = TrainState.initialize(tiny_config, tiny_dataset.split.num_classes)
        inputs, labels = fixed_batch(tiny_config, tiny_dataset)
        inputs = Tensor(np.where(np.arange(inputs.size).reshape(inputs.shape) == 0, np.nan, inputs.data))
        before = {k: v.copy() for k, v in state.model.state_arrays().items()}
        centers = [table.c.copy() for table in state.centers]
        with pytest.raises(TrainingDivergenceError):
            train_step(inputs, labels, state, loss_weights(tiny_config), 1e-3)
        after = state.model.state_arrays()
        assert set(after) == set(before)
        for name, array in before.items():
            np.testing.assert_array_equal(after[name], array, err_msg=name)
        assert any(name.endswith("running_var") for name in before)
        for table, snapshot in zip(state.centers, centers):
            np.testing.assert_array_equal(table.c, snapshot)
        assert state.optimizer.step == 0


class TestFit:
    def test_diverged_snapshot_keeps_pre_step_buffers(self, tmp_path, tiny_config, tiny_dataset):
        images = {path: np.full_like(image, np.nan) for path, image in tiny_dataset.images.items()}
        with pytest.raises(TrainingDivergenceError):
            fit(tiny_config, str(tmp_path), tiny_dataset.split, images)
        snapshot = load_trained(str(tmp_path / DIVERGED_NAME))
        for name, array in snapshot.model.buffers().items():
            expected = 1.0 if name.endswith("running_var") else 0.0
            np.testing.assert_array_equal(array, np.full_like(array, expected), err_msg=name)

    def test_zero_epochs(self, tmp_path, tiny_config, tiny_dataset):
        config = tiny_config.with_overrides(epochs=0)
        result = fit(config, str(tmp_path), tiny_dataset.split, tiny_dataset.images)
        assert result.rows == [] and result.report is None
        assert os.path.exists(tmp_path / CHECKPOINT_NAME)
        assert read_csv(str(tmp_path / METRICS_NAME)) == []
        assert load_trained(result.checkpoint_path).epoch == 0

    def test_short_run_writes_metrics(self, tmp_path, tiny_config, tiny_dataset):
        config = tiny_config.with_overrides(epochs=2)
        result = fit(config, str(tmp_path), tiny_dataset.split, tiny_dataset.images)
        rows = read_csv(str(tmp_path / METRICS_NAME))
        assert [r["epoch"] for r in rows] == ["0", "1"]
        assert all(r["mAP"] != "" for r in rows)
        assert 0.0 <= result.report.mAP <= 1.0
        assert result.state.epoch == 2
        with open(tmp_path / METRICS_NAME, encoding="utf-8") as f:
            assert f.readline().strip() == f"# fingerprint={config.fingerprint()}"

    def test_resume_matches_uninterrupted_run(self, tmp_path, tiny_config, tiny_dataset):
        config = tiny_config.with_overrides(epochs=2)
        full = fit(config, str(tmp_path / "full"), tiny_dataset.split, tiny_dataset.images)

        os.makedirs(tmp_path / "part")
        first = fit(tiny_config.with_overrides(epochs=1), str(tmp_path / "part"), tiny_dataset.split, tiny_dataset.images)
        resumed = fit(config, str(tmp_path / "part"), tiny_dataset.split, tiny_dataset.images,
                      resume=first.checkpoint_path)

        a, b = full.state.model.state_arrays(), resumed.state.model.state_arrays()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])
        for ca, cb in zip(full.state.centers, resumed.state.centers):
            np.testing.assert_array_equal(ca.c, cb.c)
        assert [r["total"] for r in full.rows] == [r["total"] for r in resumed.rows]

    def test_too_few_identities(self, tmp_path, tiny_config, tiny_dataset):
        with pytest.raises(ConfigurationError):
            fit(tiny_config.with_overrides(P=5), str(tmp_path), tiny_dataset.split, tiny_dataset.images)
