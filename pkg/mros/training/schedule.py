"""
Learning-rate schedule: linear warm-up followed by a staircase decay.

    e <  W:  lr = base * (c + (1 - c) * e / W)
    e >= W:  lr = base * factor ** floor((e - W) / period)
"""

from dataclasses import dataclass

from mros.config import RunConfig


@dataclass(frozen=True)
class LrSchedule:
    base_lr: float = 0.001
    warmup_epochs: int = 10
    warmup_coefficient: float = 0.01
    decay_factor: float = 0.1
    decay_period: int = 30

    @classmethod
    def from_config(cls, config: RunConfig) -> "LrSchedule":
        return cls(
            base_lr=config.base_lr,
            warmup_epochs=config.warmup_epochs,
            warmup_coefficient=config.warmup_coefficient,
            decay_factor=config.decay_factor,
            decay_period=config.decay_period,
        )


def lr_at_epoch(epoch: int, schedule: LrSchedule) -> float:
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    if epoch < schedule.warmup_epochs:
        c = schedule.warmup_coefficient
        return schedule.base_lr * (c + (1.0 - c) * epoch / schedule.warmup_epochs)
    steps = (epoch - schedule.warmup_epochs) // schedule.decay_period
    return schedule.base_lr * schedule.decay_factor ** steps
