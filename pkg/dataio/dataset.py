"""In-memory labelled dataset shared by every loader."""
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from core.exceptions import ContractError, DimensionError


@dataclass
class Dataset:
    """
    Observations with held-out ground-truth labels.

    Attributes:
        x: (N, dim) float64 observations
        labels: (N, G) integer labels; one column per ground-truth attribute
        name: Free-form description used in logs and manifests
    """
    x: np.ndarray
    labels: np.ndarray
    name: str = ""
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim == 1:
            self.labels = self.labels.reshape(-1, 1)
        if self.x.ndim != 2:
            raise DimensionError(f"dataset observations must be 2-D, got shape {self.x.shape}")
        if self.labels.shape[0] != self.x.shape[0]:
            raise DimensionError(
                f"dataset has {self.x.shape[0]} observations but {self.labels.shape[0]} labels"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def attribute(self, index: int = 0) -> np.ndarray:
        """Labels of one attribute, shape (N,)."""
        if not 0 <= index < self.labels.shape[1]:
            raise ContractError(f"attribute {index} out of range for {self.labels.shape[1]} label columns")
        return self.labels[:, index]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.x[indices], self.labels[indices], name=self.name, meta=dict(self.meta))

    def head(self, count: int) -> "Dataset":
        return self.subset(np.arange(min(count, self.n)))

    def split(self, holdout: float) -> Tuple["Dataset", "Dataset"]:
        """Deterministic split: the last ``holdout`` share of rows becomes the second part."""
        if not 0.0 < holdout < 1.0:
            raise ContractError(f"holdout share must lie in (0, 1), got {holdout}")
        cut = self.n - max(1, int(round(self.n * holdout)))
        if cut < 1:
            raise ContractError(f"dataset of {self.n} samples is too small to split")
        return self.subset(np.arange(cut)), self.subset(np.arange(cut, self.n))
