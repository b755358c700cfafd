"""Run hyperparameters."""
from enum import Enum
from typing import Any, Dict, Mapping, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    DEFAULT_AUG_DROPOUT,
    DEFAULT_AUG_SCALE,
    DEFAULT_AUG_SIGMA,
    DEFAULT_BASE_LR,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETA,
    DEFAULT_CHECKPOINT_EVERY,
    DEFAULT_ENCODER_HIDDEN,
    DEFAULT_EPOCHS,
    DEFAULT_FINAL_LR,
    DEFAULT_LAMBDA,
    DEFAULT_MOMENTUM,
    DEFAULT_MONITOR_SIZE,
    DEFAULT_NUM_VARIABLES,
    DEFAULT_PROJECTOR_HIDDEN,
    DEFAULT_REPRESENTATION_DIM,
    DEFAULT_UNITS_PER_VARIABLE,
    DEFAULT_WARMUP_EPOCHS,
    DEFAULT_WEIGHT_DECAY,
)
from core.exceptions import ConfigError
from dataio.augment import AugmentPolicy
from imsvd.discretize import BlockLayout
from imsvd.loss import LossVariant, LossWeights
from imsvd.model import Architecture


class OptimizerKind(str, Enum):
    ADAM = "adam"
    SGD_MOMENTUM = "sgd_momentum"


class TrainConfig(BaseModel):
    """
    Everything that determines a training run.

    Field names double as config-file keys; ``lambda`` is accepted for ``lambda_``.
    """
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    # Schedule
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=0)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, description="N, samples per batch")
    base_lr: float = DEFAULT_BASE_LR
    warmup_epochs: int = Field(default=DEFAULT_WARMUP_EPOCHS, ge=0)
    final_lr: float = Field(default=DEFAULT_FINAL_LR, ge=0.0)
    weight_decay: float = Field(default=DEFAULT_WEIGHT_DECAY, ge=0.0)

    # Optimizer
    optimizer: OptimizerKind = OptimizerKind.ADAM
    momentum: float = Field(default=DEFAULT_MOMENTUM, ge=0.0, lt=1.0)
    beta1: float = Field(default=ADAM_BETA1, ge=0.0, lt=1.0)
    beta2: float = Field(default=ADAM_BETA2, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=ADAM_EPS, gt=0.0)

    # Loss
    variant: LossVariant = LossVariant.FULL
    lambda_: float = Field(default=DEFAULT_LAMBDA, alias="lambda")
    beta: float = Field(default=DEFAULT_BETA, ge=0.0)

    # Seeds
    seed_model: int = 0
    seed_data: int = 0
    seed_shuffle: int = 0

    # Layout and architecture
    variables: int = Field(default=DEFAULT_NUM_VARIABLES, ge=1, description="M")
    units: int = Field(default=DEFAULT_UNITS_PER_VARIABLE, ge=2, description="D_M")
    encoder_hidden: Tuple[int, ...] = DEFAULT_ENCODER_HIDDEN
    representation_dim: int = Field(default=DEFAULT_REPRESENTATION_DIM, ge=1)
    projector_hidden: Tuple[int, ...] = DEFAULT_PROJECTOR_HIDDEN

    # Augmentation
    aug_sigma: float = Field(default=DEFAULT_AUG_SIGMA, ge=0.0)
    aug_dropout: float = Field(default=DEFAULT_AUG_DROPOUT, ge=0.0, lt=1.0)
    aug_scale: float = Field(default=DEFAULT_AUG_SCALE, ge=0.0, lt=1.0)

    # Bookkeeping
    checkpoint_every: int = Field(default=DEFAULT_CHECKPOINT_EVERY, ge=1)
    monitor_size: int = Field(default=DEFAULT_MONITOR_SIZE, ge=2)

    @field_validator("encoder_hidden", "projector_hidden", mode="before")
    @classmethod
    def _parse_widths(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(int(w) for w in value.split(",") if w.strip())
        return value

    @field_validator("variant", mode="before")
    @classmethod
    def _parse_variant(cls, value: Any) -> LossVariant:
        try:
            return LossVariant.parse(value)
        except ConfigError as e:
            raise ValueError(str(e)) from e

    @field_validator("optimizer", mode="before")
    @classmethod
    def _parse_optimizer(cls, value: Any) -> Any:
        if isinstance(value, str):
            return value.strip().lower().replace("-", "_")
        return value

    @model_validator(mode="after")
    def _check_invariants(self) -> "TrainConfig":
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be at least 2, got {self.batch_size}")
        if not self.base_lr > 0:
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        if not self.lambda_ > 0:
            raise ValueError(f"lambda must be positive, got {self.lambda_}")
        if self.epochs > 0 and self.warmup_epochs >= self.epochs:
            raise ValueError(
                f"warmup_epochs ({self.warmup_epochs}) must be less than epochs ({self.epochs})"
            )
        if any(w < 1 for w in self.encoder_hidden + self.projector_hidden):
            raise ValueError("hidden layer widths must be at least 1")
        return self

    @classmethod
    def build(cls, values: Mapping[str, Any]) -> "TrainConfig":
        """Validate raw values (strings allowed), raising ConfigError on failure."""
        try:
            return cls.model_validate(dict(values))
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"invalid training config: {problems}") from e

    def updated(self, **overrides: Any) -> "TrainConfig":
        values = self.to_values()
        values.update(overrides)
        return TrainConfig.build(values)

    def to_values(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=False)

    @property
    def layout(self) -> BlockLayout:
        return BlockLayout(self.variables, self.units)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(lambda_=self.lambda_, beta=self.beta)

    @property
    def augment_policy(self) -> AugmentPolicy:
        return AugmentPolicy(sigma=self.aug_sigma, dropout=self.aug_dropout, scale=self.aug_scale)

    def architecture(self, input_dim: int) -> Architecture:
        return Architecture(
            input_dim=input_dim,
            layout=self.layout,
            encoder_hidden=self.encoder_hidden,
            representation_dim=self.representation_dim,
            projector_hidden=self.projector_hidden,
        )

    def to_manifest(self) -> Dict[str, object]:
        """Flat key=value view; keys are the config-file spellings."""
        manifest: Dict[str, object] = {}
        for key, value in self.model_dump(by_alias=True).items():
            manifest[key] = value.value if isinstance(value, Enum) else value
        return manifest
