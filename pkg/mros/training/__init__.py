"""Optimization: schedule, Adam, checkpoints and the training loop."""

from mros.training.schedule import LrSchedule, lr_at_epoch
from mros.training.optimizer import OptimizerState, adam_step
from mros.training.checkpoint import CHECKPOINT_NAME, Checkpoint, load_checkpoint, save_checkpoint
from mros.training.trainer import (
    DIVERGED_NAME,
    METRICS_NAME,
    FitResult,
    TrainState,
    compute_losses,
    evaluate_model,
    fit,
    init_centers,
    load_trained,
    loss_weights,
    train_step,
)

__all__ = [
    'LrSchedule',
    'lr_at_epoch',
    'OptimizerState',
    'adam_step',
    'Checkpoint',
    'CHECKPOINT_NAME',
    'DIVERGED_NAME',
    'save_checkpoint',
    'load_checkpoint',
    'TrainState',
    'FitResult',
    'METRICS_NAME',
    'init_centers',
    'loss_weights',
    'compute_losses',
    'train_step',
    'evaluate_model',
    'fit',
    'load_trained',
]
