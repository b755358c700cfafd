"""Checks of the loss minimizer's properties on a trained model.

At the minimizer every block is one-hot, every variable's marginal is uniform,
distinct variables are pairwise independent and the two views of a sample
produce the same code. The report measures how close a model gets.
"""
import logging
from collections import defaultdict
from typing import Dict, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field

from core.constants import ONEHOT_THRESHOLDS, REFERENCE_ONEHOT_FRACTION
from dataio.augment import AugmentPolicy, augment
from dataio.dataset import Dataset
from imsvd.discretize import DiscretizedBatch, cross_joint
from imsvd.infotheory import summarize
from imsvd.model import ModelParams, encode_batched

logger = logging.getLogger(__name__)


class TheoremReport(BaseModel):
    """Verifier statistics; information measures in nats."""
    onehot_frac_090: float = Field(ge=0.0, le=1.0, description="Share of blocks with max activation > 0.9")
    onehot_frac_099: float = Field(ge=0.0, le=1.0, description="Share of blocks with max activation > 0.99")
    marginal_entropy_ratio: float = Field(ge=0.0, le=1.0 + 1e-9, description="Mean marginal entropy / ln D_M")
    max_pairwise_mi: float = Field(ge=0.0)
    mean_pairwise_mi: float = Field(ge=0.0)
    ti_mean: float = Field(ge=0.0, le=1.0 + 1e-9, description="Mean per-block inner product of two views")
    offdiag_uniformity: float = Field(ge=0.0, description="Max |P - 1/D_M^2| over off-diagonal blocks")
    mean_entropy: float
    total_correlation_2: float
    collision_fraction: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    num_samples: int
    variables: int
    units: int
    reference_onehot_frac_090: float = REFERENCE_ONEHOT_FRACTION


def onehot_fraction(q: DiscretizedBatch, threshold: float) -> float:
    """Share of (sample, variable) blocks whose largest activation exceeds ``threshold``."""
    return float((q.blocks.max(axis=2) > threshold).mean())


def block_inner_products(q1: DiscretizedBatch, q2: DiscretizedBatch) -> np.ndarray:
    """(N, M) inner products between matching blocks of two views."""
    return (q1.blocks * q2.blocks).sum(axis=2)


def offdiag_uniformity(q: DiscretizedBatch) -> float:
    layout = q.layout
    if layout.variables < 2:
        return 0.0
    matrix = cross_joint(q, q).matrix
    deviation = np.abs(matrix - 1.0 / layout.units ** 2)
    mask = np.kron(1.0 - np.eye(layout.variables), np.ones((layout.units, layout.units))) > 0
    return float(deviation[mask].max())


def code_distinctness(
    params: ModelParams,
    dataset: Dataset,
    batch_size: int = 512,
    threads: int = 1,
) -> float:
    """
    Fraction of samples whose hard code is shared with a sample of different labels.

    Each block is assigned its argmax unit; the M-tuple is the sample's code.
    Returns 1 when every sample has the same code and at least two label
    tuples occur; 0 when no code is shared across label tuples.
    """
    _, q = encode_batched(params, dataset.x, batch_size, threads)
    return collision_fraction(q, dataset.labels)


def collision_fraction(q: DiscretizedBatch, labels: np.ndarray) -> float:
    codes = q.hard_codes()
    groups: Dict[Tuple[int, ...], Set[Tuple[int, ...]]] = defaultdict(set)
    keys = [tuple(int(c) for c in code) for code in codes]
    for key, label in zip(keys, labels):
        groups[key].add(tuple(int(v) for v in np.atleast_1d(label)))
    colliding = sum(1 for key in keys if len(groups[key]) > 1)
    return colliding / len(keys)


def theorem_verify(
    params: ModelParams,
    dataset: Dataset,
    batch_size: int = 512,
    policy: AugmentPolicy = AugmentPolicy(),
    seed: int = 0,
    threads: int = 1,
) -> TheoremReport:
    """
    Aggregate the verifier statistics over a whole dataset.

    Marginal, MI and one-hot statistics use clean inputs; ``ti_mean`` uses two
    augmented views drawn from ``seed``.

    Args:
        params: Trained parameters
        dataset: Evaluation samples
        batch_size: Chunk size for encoding
        policy: Augmentation used for the paired views
        seed: Seed of the paired views
        threads: Encoding workers

    Returns:
        TheoremReport
    """
    _, q = encode_batched(params, dataset.x, batch_size, threads)
    summary = summarize(q)
    view_seeds = np.random.SeedSequence(seed).spawn(2)
    _, q1 = encode_batched(params, augment(dataset.x, policy, view_seeds[0]), batch_size, threads)
    _, q2 = encode_batched(params, augment(dataset.x, policy, view_seeds[1]), batch_size, threads)

    low, high = ONEHOT_THRESHOLDS
    report = TheoremReport(
        onehot_frac_090=onehot_fraction(q, low),
        onehot_frac_099=onehot_fraction(q, high),
        marginal_entropy_ratio=min(summary.mean_entropy / float(np.log(q.layout.units)), 1.0 + 1e-9),
        max_pairwise_mi=summary.max_pairwise_mi,
        mean_pairwise_mi=summary.mean_pairwise_mi,
        ti_mean=float(block_inner_products(q1, q2).mean()),
        offdiag_uniformity=offdiag_uniformity(q),
        mean_entropy=summary.mean_entropy,
        total_correlation_2=summary.total_correlation_2,
        collision_fraction=collision_fraction(q, dataset.labels),
        num_samples=q.n,
        variables=q.layout.variables,
        units=q.layout.units,
    )
    logger.info(
        "Verifier: onehot>0.9 %.4f, entropy ratio %.4f, max MI %.4g, ti mean %.4f",
        report.onehot_frac_090, report.marginal_entropy_ratio, report.max_pairwise_mi, report.ti_mean,
    )
    return report
