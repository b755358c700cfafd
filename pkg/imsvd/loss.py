"""Cross-joint entropy loss and its ablation variants.

Terms:
    ti   transform invariance, mean negative log inner product of matching blocks
    tic  transform invariance measured by cross-entropy (view 1 target, view 2 prediction)
    de   p log p over the diagonal entries of the diagonal cross-joint blocks
    oe   p log p over every entry of the off-diagonal cross-joint blocks

de and oe are <= 0; minimizing them maximizes the entropy of the selected
cross-joint entries. Entries (m1 = m2, d1 != d2) are never selected.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from core.constants import DEFAULT_BETA, DEFAULT_LAMBDA, TI_EPS, VARIANT_ALIASES
from core.exceptions import ConfigError, ContractError, DimensionError
from engine.autodiff import Tape, Var, add, hadamard, log_eps, matmul, scale, total_sum
from imsvd.discretize import BlockLayout, DiscretizedBatch, cross_joint_var
from imsvd.infotheory import avg_subset_entropy, total_correlation


class LossVariant(str, Enum):
    """Which terms make up the training loss."""
    FULL = "full"  # ti + lambda * (de + oe)
    DE_OE = "de-oe"  # lambda * (de + oe)
    OE_TI = "oe-ti"  # ti + lambda * oe
    DE_OE_TIC = "de-oe-tic"  # tic + lambda * (de + oe)
    TI_ONLY = "ti"  # ti alone; diagnostic, collapses

    @classmethod
    def parse(cls, value) -> "LossVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        if key not in VARIANT_ALIASES:
            choices = ", ".join(sorted(VARIANT_ALIASES))
            raise ConfigError(f"unknown loss variant {value!r}; expected one of {choices}")
        return cls(VARIANT_ALIASES[key])


@dataclass(frozen=True)
class LossWeights:
    """
    Coefficients of the objective.

    ``lambda_`` scales the entropy terms of the loss. ``beta`` weights the
    total-correlation term of the maximization objective and is only consumed
    by :func:`objective_report`.
    """
    lambda_: float = DEFAULT_LAMBDA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ContractError(f"lambda must be positive, got {self.lambda_}")
        if self.beta < 0:
            raise ContractError(f"beta must be non-negative, got {self.beta}")


@dataclass
class LossBreakdown:
    """Scalar loss and all of its terms; ``loss`` is the tape node to differentiate."""
    total: float
    ti: float
    de: float
    oe: float
    tic: float
    variant: LossVariant
    loss: Optional[Var] = field(default=None, repr=False, compare=False)

    def as_dict(self) -> Dict[str, float]:
        return {"loss": self.total, "ti": self.ti, "de": self.de, "oe": self.oe, "tic": self.tic}


def _check_views(q1: Var, q2: Var, layout: BlockLayout, op: str) -> None:
    if q1.shape != q2.shape:
        raise DimensionError(f"{op}: view shapes differ, {q1.shape} vs {q2.shape}")
    layout.check_width(q1.shape[1], op)


def ti_term(q1: Var, q2: Var, layout: BlockLayout) -> Var:
    """-(1/(N*M)) sum_{i,m} log(eps + <q1_i(m,:), q2_i(m,:)>), eps = 1e-8."""
    _check_views(q1, q2, layout, "ti_term")
    tape = q1.tape
    n = q1.shape[0]
    inner = matmul(hadamard(q1, q2), tape.constant(layout.block_indicator()))
    logs = log_eps(add(inner, tape.constant(np.full(inner.shape, TI_EPS))))
    return scale(total_sum(logs), -1.0 / (n * layout.variables))


def tic_term(q1: Var, q2: Var, layout: BlockLayout) -> Var:
    """-(1/(N*M)) sum_{i,m,d} q1 * log(eps + q2)."""
    _check_views(q1, q2, layout, "tic_term")
    tape = q1.tape
    n = q1.shape[0]
    logs = log_eps(add(q2, tape.constant(np.full(q2.shape, TI_EPS))))
    return scale(total_sum(hadamard(q1, logs)), -1.0 / (n * layout.variables))


def selection_masks(layout: BlockLayout) -> Tuple[np.ndarray, np.ndarray]:
    """0/1 masks over the (D, D) cross-joint matrix for the de and oe terms."""
    m, d = layout.variables, layout.units
    diagonal = np.eye(layout.dim)
    off_block = np.kron(np.ones((m, m)) - np.eye(m), np.ones((d, d)))
    return diagonal, off_block


def entropy_terms(cross: Var, layout: BlockLayout) -> Tuple[Var, Var]:
    """
    Masked p log p sums of the cross-joint matrix, each scaled by 1/M^2.

    Args:
        cross: (D, D) tape-backed cross-joint matrix
        layout: Block layout

    Returns:
        (de, oe) 1x1 variables

    Raises:
        ContractError: If the matrix does not match the layout
    """
    if cross.shape != (layout.dim, layout.dim):
        raise ContractError(
            f"entropy_terms: cross-joint shape {cross.shape} does not match layout D={layout.dim}"
        )
    tape = cross.tape
    plogp = hadamard(cross, log_eps(cross))
    diagonal, off_block = selection_masks(layout)
    norm = 1.0 / layout.variables ** 2
    de = scale(total_sum(hadamard(plogp, tape.constant(diagonal))), norm)
    oe = scale(total_sum(hadamard(plogp, tape.constant(off_block))), norm)
    return de, oe


def imsvd_loss(
    q1: Var,
    q2: Var,
    layout: BlockLayout,
    weights: LossWeights = LossWeights(),
    variant: LossVariant = LossVariant.FULL,
) -> LossBreakdown:
    """
    Tape-backed training loss for two discretized views.

    Every term is reported; only the variant's terms enter ``total``.

    Args:
        q1: (N, D) block-softmaxed view 1
        q2: (N, D) block-softmaxed view 2
        layout: Block layout
        weights: Loss coefficients
        variant: Active loss variant

    Returns:
        Breakdown whose ``loss`` node is ready for ``Tape.backward``
    """
    variant = LossVariant.parse(variant)
    _check_views(q1, q2, layout, "imsvd_loss")
    ti = ti_term(q1, q2, layout)
    tic = tic_term(q1, q2, layout)
    de, oe = entropy_terms(cross_joint_var(q1, q2), layout)

    lam = weights.lambda_
    if variant is LossVariant.FULL:
        total = add(ti, scale(add(de, oe), lam))
    elif variant is LossVariant.DE_OE:
        total = scale(add(de, oe), lam)
    elif variant is LossVariant.OE_TI:
        total = add(ti, scale(oe, lam))
    elif variant is LossVariant.DE_OE_TIC:
        total = add(tic, scale(add(de, oe), lam))
    else:
        total = ti

    return LossBreakdown(
        total=total.item(),
        ti=ti.item(),
        de=de.item(),
        oe=oe.item(),
        tic=tic.item(),
        variant=variant,
        loss=total,
    )


def evaluate_loss(
    q1: DiscretizedBatch,
    q2: DiscretizedBatch,
    weights: LossWeights = LossWeights(),
    variant: LossVariant = LossVariant.FULL,
) -> LossBreakdown:
    """Forward-only loss of two already discretized views."""
    if q1.layout != q2.layout:
        raise ContractError(f"evaluate_loss: layouts differ, {q1.layout} vs {q2.layout}")
    tape = Tape()
    return imsvd_loss(tape.constant(q1.q), tape.constant(q2.q), q1.layout, weights, variant)


def fixed_point_loss(layout: BlockLayout, weights: LossWeights = LossWeights()) -> float:
    """Closed-form de + oe at the loss minimizer: -lambda * (2 - 1/M) * ln D_M."""
    return -weights.lambda_ * (2.0 - 1.0 / layout.variables) * float(np.log(layout.units))


def objective_report(
    q1: DiscretizedBatch,
    q2: DiscretizedBatch,
    weights: LossWeights = LossWeights(),
) -> Dict[str, float]:
    """
    Forward-only value of the maximization objective and its parts.

    objective = (1/N) sum_i <q1_i, q2_i> + lambda/2 (S1(q1) + S1(q2))
                - beta/2 (C2(q1) + C2(q2))
    """
    if q1.layout != q2.layout or q1.n != q2.n:
        raise ContractError("objective_report: views must share layout and batch size")
    similarity = float((q1.q * q2.q).sum() / q1.n)
    entropy_part = 0.5 * (avg_subset_entropy(q1, 1) + avg_subset_entropy(q2, 1))
    if q1.layout.variables >= 2:
        correlation_part = 0.5 * (total_correlation(q1, 2) + total_correlation(q2, 2))
    else:
        correlation_part = 0.0
    return {
        "similarity": similarity,
        "mean_entropy": entropy_part,
        "total_correlation_2": correlation_part,
        "objective": similarity + weights.lambda_ * entropy_part - weights.beta * correlation_part,
    }
