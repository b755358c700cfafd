"""Desk-scale augmentation producing the two views of a batch."""
from typing import Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.constants import DEFAULT_AUG_DROPOUT, DEFAULT_AUG_SCALE, DEFAULT_AUG_SIGMA
from core.exceptions import ContractError

SeedLike = Union[int, Sequence[int], np.random.SeedSequence]


class AugmentPolicy(BaseModel):
    """Magnitudes of the three per-sample distortions."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    sigma: float = Field(default=DEFAULT_AUG_SIGMA, description="Std of additive Gaussian noise")
    dropout: float = Field(default=DEFAULT_AUG_DROPOUT, description="Fraction of coordinates zeroed")
    scale: float = Field(default=DEFAULT_AUG_SCALE, description="Global scaling drawn from [1-s, 1+s]")

    def validate_ranges(self) -> None:
        if self.sigma < 0:
            raise ContractError(f"augment: sigma must be non-negative, got {self.sigma}")
        if not 0 <= self.dropout < 1:
            raise ContractError(f"augment: dropout fraction must lie in [0, 1), got {self.dropout}")
        if not 0 <= self.scale < 1:
            raise ContractError(f"augment: scale must lie in [0, 1), got {self.scale}")

    @classmethod
    def identity(cls) -> "AugmentPolicy":
        return cls(sigma=0.0, dropout=0.0, scale=0.0)


def augment(x: np.ndarray, policy: AugmentPolicy, seed: SeedLike) -> np.ndarray:
    """
    One random view of a batch.

    Each sample gets additive noise, coordinate dropout, then a global scale
    factor. Labels are untouched, so attribute identity is preserved.

    Args:
        x: (N, dim) batch
        policy: Distortion magnitudes
        seed: Seed for this view

    Returns:
        (N, dim) augmented copy

    Raises:
        ContractError: If a magnitude is out of range
    """
    policy.validate_ranges()
    rng = np.random.default_rng(seed)
    view = np.array(x, dtype=np.float64)
    if policy.sigma > 0:
        view = view + rng.normal(0.0, policy.sigma, size=view.shape)
    if policy.dropout > 0:
        view = view * (rng.random(view.shape) >= policy.dropout)
    if policy.scale > 0:
        view = view * rng.uniform(1.0 - policy.scale, 1.0 + policy.scale, size=(view.shape[0], 1))
    return view
