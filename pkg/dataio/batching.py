"""Epoch-wise shuffled multiview batches."""
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from core.exceptions import ContractError
from dataio.augment import AugmentPolicy, augment
from dataio.dataset import Dataset


@dataclass
class MultiviewBatch:
    """Two index-aligned views of the same samples."""
    x1: np.ndarray
    x2: np.ndarray
    labels: np.ndarray
    indices: np.ndarray

    @property
    def size(self) -> int:
        return self.x1.shape[0]


def epoch_permutation(n: int, shuffle_seed: int, epoch: int) -> np.ndarray:
    """Sample order of one epoch; independent of every other epoch."""
    return np.random.default_rng(np.random.SeedSequence([shuffle_seed, epoch])).permutation(n)


def view_seed(shuffle_seed: int, epoch: int, batch: int, view: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([shuffle_seed, epoch, batch, view])


def batches_per_epoch(n: int, batch_size: int) -> int:
    """Full batches per epoch; the last partial batch is dropped."""
    if batch_size < 1:
        raise ContractError(f"batch size must be positive, got {batch_size}")
    return n // batch_size


def batch_iter(
    dataset: Dataset,
    batch_size: int,
    shuffle_seed: int,
    policy: AugmentPolicy = AugmentPolicy(),
    epoch: int = 0,
) -> Iterator[MultiviewBatch]:
    """
    Yield the batches of one epoch, each augmented twice with independent sub-seeds.

    Args:
        dataset: Source samples
        batch_size: N
        shuffle_seed: Seed of the shuffling and augmentation streams
        policy: Augmentation magnitudes
        epoch: Epoch index; selects the permutation and sub-seeds

    Raises:
        ContractError: If N is zero or larger than the dataset
    """
    count = batches_per_epoch(dataset.n, batch_size)
    if batch_size > dataset.n:
        raise ContractError(f"batch size {batch_size} exceeds dataset size {dataset.n}")
    order = epoch_permutation(dataset.n, shuffle_seed, epoch)
    for b in range(count):
        indices = order[b * batch_size:(b + 1) * batch_size]
        x = dataset.x[indices]
        yield MultiviewBatch(
            x1=augment(x, policy, view_seed(shuffle_seed, epoch, b, 0)),
            x2=augment(x, policy, view_seed(shuffle_seed, epoch, b, 1)),
            labels=dataset.labels[indices],
            indices=indices,
        )
