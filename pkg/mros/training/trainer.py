"""
Training loop.

One step: forward through backbone and head, triplet and center losses on
the metric features, label-smoothed cross-entropy averaged over every
stripe classifier, backward, Adam on all model parameters, then the
dedicated center update.
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from mros.autodiff import Tensor
from mros.config import RunConfig
from mros.data import BatchLoader, DatasetSplit, PKSampler, open_dataset, write_identity_map
from mros.data.synthetic import IDENTITY_MAP_NAME
from mros.errors import ConfigurationError, EmptyDatasetError, MROSError, TrainingDivergenceError
from mros.evaluation import EvalReport, evaluate, extract_embeddings, format_summary
from mros.losses import (
    BatchEmbedding,
    ClassCenters,
    LossWeights,
    center_loss,
    total_cross_entropy,
    total_loss,
    triplet_batch_hard,
    update_centers,
)
from mros.model import HeadOutput, MROSNetwork
from mros.tools.artifacts import read_csv, write_csv
from mros.training.checkpoint import CHECKPOINT_NAME, Checkpoint, load_checkpoint, save_checkpoint
from mros.training.optimizer import OptimizerState, adam_step
from mros.training.schedule import LrSchedule, lr_at_epoch
from mros.utils.logging import RunLogger, get_logger

logger = get_logger("mros.training")

METRICS_NAME = "metrics.csv"
METRICS_HEADER = ["epoch", "lr", "L_triplet", "L_center", "L_cross", "total", "mAP", "rank1"]
DIVERGED_NAME = "checkpoint_diverged.mros"


@dataclass
class TrainState:
    """Mutable state of a run; ``epoch`` counts completed epochs."""

    config: RunConfig
    model: MROSNetwork
    centers: List[ClassCenters]
    optimizer: OptimizerState
    rng: np.random.Generator
    num_classes: int
    epoch: int = 0

    @classmethod
    def initialize(cls, config: RunConfig, num_classes: int) -> "TrainState":
        model = MROSNetwork.from_config(config, num_classes)
        return cls(
            config=config,
            model=model,
            centers=init_centers(model, num_classes, config.center_update_rate),
            optimizer=OptimizerState.from_config(config),
            rng=np.random.default_rng(config.seed),
            num_classes=num_classes,
        )

    def to_checkpoint(self, metadata: Optional[dict] = None) -> Checkpoint:
        return Checkpoint(
            config=self.config,
            num_classes=self.num_classes,
            epoch=self.epoch,
            model_state={k: v.copy() for k, v in self.model.state_arrays().items()},
            centers=[ClassCenters(c.c.copy(), c.update_rate) for c in self.centers],
            optimizer=OptimizerState(
                beta1=self.optimizer.beta1,
                beta2=self.optimizer.beta2,
                eps=self.optimizer.eps,
                weight_decay=self.optimizer.weight_decay,
                step=self.optimizer.step,
                m={k: v.copy() for k, v in self.optimizer.m.items()},
                v={k: v.copy() for k, v in self.optimizer.v.items()},
            ),
            rng_state=self.rng.bit_generator.state,
            metadata=metadata or {},
        )

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, config: Optional[RunConfig] = None) -> "TrainState":
        """Restore a state; ``config`` may only differ from the stored one in its epoch budget."""
        config = config or ckpt.config
        if config.with_overrides(epochs=ckpt.config.epochs).fingerprint() != ckpt.fingerprint:
            raise ConfigurationError(
                f"checkpoint fingerprint {ckpt.fingerprint} does not match config {config.fingerprint()}"
            )
        model = MROSNetwork.from_config(config, ckpt.num_classes)
        model.load_state_arrays(ckpt.model_state)
        rng = np.random.default_rng(config.seed)
        rng.bit_generator.state = ckpt.rng_state
        return cls(
            config=config,
            model=model,
            centers=ckpt.centers,
            optimizer=ckpt.optimizer,
            rng=rng,
            num_classes=ckpt.num_classes,
            epoch=ckpt.epoch,
        )


def init_centers(model: MROSNetwork, num_classes: int, update_rate: float) -> List[ClassCenters]:
    """One table on ``G`` for global metric settings, else one per T4 stripe row."""
    head = model.head
    if head.setting.global_metric:
        return [ClassCenters.zeros(num_classes, model.descriptor_dim, update_rate)]
    rows = head.setting.stripe_rows(head.s)
    return [ClassCenters.zeros(num_classes, head.channels[4], update_rate) for _ in range(rows)]


def loss_weights(config: RunConfig) -> LossWeights:
    return LossWeights(alpha=config.alpha, beta=config.beta, epsilon=config.epsilon)


def compute_losses(
    output: HeadOutput,
    labels: np.ndarray,
    centers: List[ClassCenters],
    weights: LossWeights,
) -> Dict[str, Tensor]:
    """Triplet and center losses averaged over the metric features, plus the stripe cross-entropy."""
    features = output.metric_features
    if len(features) != len(centers):
        raise ConfigurationError(f"{len(features)} metric features but {len(centers)} center tables")
    triplet = None
    center = None
    for feature, table in zip(features, centers):
        batch = BatchEmbedding(feature, labels)
        t = triplet_batch_hard(batch, weights.alpha)
        c = center_loss(batch, table)
        triplet = t if triplet is None else triplet + t
        center = c if center is None else center + c
    n = float(len(features))
    cross = total_cross_entropy(output.logits, labels, weights.epsilon, expected_count=len(output.logits))
    return {"triplet": triplet / n, "center": center / n, "cross": cross}


def train_step(inputs, labels: np.ndarray, state: TrainState, weights: LossWeights, lr: float) -> Dict[str, float]:
    """
    One optimization step on a P x K batch.

    Returns:
        Scalar values of ``triplet``, ``center``, ``cross`` and ``total``

    Raises:
        TrainingDivergenceError: before any parameter is touched
    """
    model = state.model
    model.zero_grad()
    expected = model.head.setting.classifier_count(model.head.s)
    # forward folds batch statistics into the BN buffers; roll them back if the step fails
    buffers = {name: array.copy() for name, array in model.buffers().items()}
    try:
        output = model.forward(inputs, mode="train")
        if len(output.logits) != expected:
            raise ConfigurationError(f"model produced {len(output.logits)} logit sets, expected {expected}")
        parts = compute_losses(output, labels, state.centers, weights)
        total = total_loss(parts, weights)
        total.backward()
        adam_step(model.parameters(), state.optimizer, lr)
    except MROSError:
        model.head.load_buffers(buffers)
        raise
    for feature, table in zip(output.metric_features, state.centers):
        update_centers(BatchEmbedding(Tensor(feature.data), labels), table)
    result = {name: parts[name].item() for name in ("triplet", "center", "cross")}
    result["total"] = total.item()
    return result


@dataclass
class FitResult:
    state: TrainState
    rows: List[dict] = field(default_factory=list)
    report: Optional[EvalReport] = None
    checkpoint_path: Optional[str] = None


def evaluate_model(state: TrainState, split: DatasetSplit, loader: BatchLoader, workers: int = 1) -> EvalReport:
    config = state.config
    query = extract_embeddings(state.model, loader, split.query)
    gallery = extract_embeddings(state.model, loader, split.gallery)
    return evaluate(
        query, gallery,
        metric=config.metric,
        apply_protocol=config.protocol_filter,
        max_rank=config.max_rank,
        workers=workers,
    )


def _row(epoch: int, lr: float, losses: Dict[str, float], report: Optional[EvalReport]) -> dict:
    return {
        "epoch": epoch,
        "lr": f"{lr:.8g}",
        "L_triplet": f"{losses['triplet']:.8f}",
        "L_center": f"{losses['center']:.8f}",
        "L_cross": f"{losses['cross']:.8f}",
        "total": f"{losses['total']:.8f}",
        "mAP": f"{report.mAP:.6f}" if report else "",
        "rank1": f"{report.rank1:.6f}" if report else "",
    }


def _should_evaluate(config: RunConfig, epoch: int) -> bool:
    done = epoch + 1
    return config.eval_every > 0 and (done % config.eval_every == 0 or done == config.epochs)


def fit(
    config: RunConfig,
    out_dir: str,
    dataset: Optional[DatasetSplit] = None,
    images: Optional[Dict[str, np.ndarray]] = None,
    resume: Optional[str] = None,
    run_logger: Optional[RunLogger] = None,
) -> FitResult:
    """
    Train for ``config.epochs`` epochs.

    Args:
        config: Run configuration
        out_dir: Directory for the checkpoint and ``metrics.csv``
        dataset: Pre-loaded split; loaded from the config when omitted
        images: In-memory images keyed by record path
        resume: Checkpoint to continue from

    Returns:
        Final state, per-epoch metric rows, the last evaluation report and
        the checkpoint path
    """
    if dataset is None:
        dataset, images = open_dataset(config)
    if not dataset.train:
        raise EmptyDatasetError("training split is empty")
    if len({r.label for r in dataset.train}) < config.P:
        raise ConfigurationError(
            f"P={config.P} exceeds the {len({r.label for r in dataset.train})} training identities"
        )

    if resume:
        state = TrainState.from_checkpoint(load_checkpoint(resume), config)
        logger.info(f"Resuming from {resume} at epoch {state.epoch}")
    else:
        state = TrainState.initialize(config, dataset.num_classes)
    if state.num_classes != dataset.num_classes:
        raise ConfigurationError(f"model has {state.num_classes} classes, dataset {dataset.num_classes}")

    info = state.model.summary()
    fingerprint = config.fingerprint()
    if run_logger:
        run_logger.log_setting("train", config.setting.value, fingerprint, info["parameters"])

    os.makedirs(out_dir, exist_ok=True)
    write_identity_map(Path(out_dir) / IDENTITY_MAP_NAME, dataset.identity_map, fingerprint)
    metrics_path = os.path.join(out_dir, METRICS_NAME)
    rows: List[dict] = []
    if resume and os.path.exists(metrics_path):
        rows = [r for r in read_csv(metrics_path) if int(r["epoch"]) < state.epoch]

    loader = BatchLoader(config, images=images)
    sampler = PKSampler(dataset.train, config.P, config.K, state.rng)
    schedule = LrSchedule.from_config(config)
    weights = loss_weights(config)
    checkpoint_path = os.path.join(out_dir, CHECKPOINT_NAME)
    report: Optional[EvalReport] = None

    save_checkpoint(checkpoint_path, state.to_checkpoint())
    while state.epoch < config.epochs:
        epoch = state.epoch
        lr = lr_at_epoch(epoch, schedule)
        sums = {"triplet": 0.0, "center": 0.0, "cross": 0.0, "total": 0.0}
        steps = 0
        for batch in sampler:
            inputs = loader.load(batch.records, state.rng)
            try:
                losses = train_step(inputs, batch.labels, state, weights, lr)
            except TrainingDivergenceError as e:
                path = save_checkpoint(os.path.join(out_dir, DIVERGED_NAME), state.to_checkpoint({"diverged": e.part}))
                logger.error(f"Epoch {epoch}: {e}; state saved to {path}")
                if run_logger:
                    run_logger.log_error("train", str(e), part=e.part)
                raise
            for k in sums:
                sums[k] += losses[k]
            steps += 1
        means = {k: v / steps for k, v in sums.items()}
        state.epoch += 1

        report = evaluate_model(state, dataset, loader) if _should_evaluate(config, epoch) else None
        rows.append(_row(epoch, lr, means, report))
        logger.info(
            f"Epoch {epoch + 1}/{config.epochs} lr={lr:.2e} total={means['total']:.4f} "
            f"(triplet {means['triplet']:.4f}, center {means['center']:.4f}, cross {means['cross']:.4f})"
        )
        if report:
            logger.info(format_summary(report, prefix=f"Epoch {epoch + 1}"))
        if run_logger:
            run_logger.log_epoch("train", epoch, lr, means)
            if report:
                run_logger.log_evaluation("train", epoch, report.as_dict())

        write_csv(out_dir, METRICS_NAME, METRICS_HEADER, [[r[h] for h in METRICS_HEADER] for r in rows], fingerprint)
        save_checkpoint(checkpoint_path, state.to_checkpoint())

    if not rows:
        write_csv(out_dir, METRICS_NAME, METRICS_HEADER, [], fingerprint)
    return FitResult(state=state, rows=rows, report=report, checkpoint_path=checkpoint_path)


def load_trained(path: str) -> TrainState:
    """Rebuild a training state (model, centers, optimizer) from a checkpoint."""
    return TrainState.from_checkpoint(load_checkpoint(path))
