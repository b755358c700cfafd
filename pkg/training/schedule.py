"""Learning-rate schedule: linear warmup from zero, then cosine decay to the final rate."""
import math

from core.exceptions import ContractError
from training.config import TrainConfig


def warmup_steps(total_steps: int, config: TrainConfig) -> int:
    """Steps in the warmup ramp, proportional to warmup_epochs / epochs."""
    if config.epochs == 0 or total_steps == 0:
        return 0
    steps = int(round(total_steps * config.warmup_epochs / config.epochs))
    return min(steps, total_steps - 1)


def lr_at(step: int, total_steps: int, config: TrainConfig) -> float:
    """
    Learning rate at a given optimizer step.

    Args:
        step: Zero-based step index
        total_steps: Steps in the whole run
        config: Provides base_lr, final_lr, warmup_epochs and epochs

    Returns:
        0 at step 0, base_lr at the end of the warmup, final_lr at the last step

    Raises:
        ContractError: If step is outside [0, total_steps)
    """
    if not 0 <= step < total_steps:
        raise ContractError(f"lr_at: step {step} outside [0, {total_steps})")
    warmup = warmup_steps(total_steps, config)
    if step < warmup:
        return config.base_lr * step / warmup

    span = total_steps - 1 - warmup
    progress = (step - warmup) / span if span > 0 else 0.0
    # Exactly base_lr at progress 0.
    return config.base_lr - 0.5 * (config.base_lr - config.final_lr) * (1.0 - math.cos(math.pi * progress))
