"""Shannon measures over estimated distributions, in nats."""
import itertools
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from core.constants import LOG_EPS, MAX_JOINT_ORDER, NORMALIZATION_TOL
from core.exceptions import ContractError
from imsvd.discretize import DiscretizedBatch, estimate_joint, estimate_marginals


@dataclass(frozen=True)
class SubsetOrder:
    """Size r of the variable subsets averaged over."""
    r: int

    def validate(self, num_variables: int) -> None:
        if self.r < 1:
            raise ContractError(f"subset order must be at least 1, got r={self.r}")
        if self.r > num_variables:
            raise ContractError(f"subset order r={self.r} exceeds M={num_variables}")
        if self.r > MAX_JOINT_ORDER:
            raise ContractError(f"subset order r={self.r} exceeds the limit of {MAX_JOINT_ORDER}")


def _order(r) -> SubsetOrder:
    return r if isinstance(r, SubsetOrder) else SubsetOrder(int(r))


def entropy(dist: np.ndarray) -> float:
    """
    -sum p log p over a flat or multi-axis table, with 0 log 0 = 0.

    Raises:
        ContractError: If entries are negative or do not sum to one within 1e-6
    """
    p = np.asarray(dist, dtype=np.float64)
    if p.size == 0:
        raise ContractError("entropy: empty distribution")
    if p.min() < -NORMALIZATION_TOL:
        raise ContractError(f"entropy: negative probability {p.min()}")
    total = p.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ContractError(f"entropy: probabilities sum to {total}, not 1")
    p = np.clip(p, 0.0, None)
    return float(-(p * np.log(np.maximum(p, LOG_EPS))).sum())


def avg_subset_entropy(q: DiscretizedBatch, r) -> float:
    """
    Mean joint entropy over all C(M, r) unordered variable subsets.

    Subsets are visited in lexicographic order. For r = 1 this is the mean
    marginal entropy.
    """
    order = _order(r)
    order.validate(q.layout.variables)
    if order.r == 1:
        marginals = estimate_marginals(q)
        values = [entropy(marginals.row(m)) for m in range(q.layout.variables)]
    else:
        values = [
            entropy(estimate_joint(q, subset).table)
            for subset in itertools.combinations(range(q.layout.variables), order.r)
        ]
    return float(sum(values) / len(values))


def total_correlation(q: DiscretizedBatch, r) -> float:
    """Average total correlation of r-variable subsets: r * S(1) - S(r)."""
    order = _order(r)
    order.validate(q.layout.variables)
    return order.r * avg_subset_entropy(q, 1) - avg_subset_entropy(q, order)


def _raw_mutual_information(q: DiscretizedBatch, m1: int, m2: int) -> float:
    marginals = estimate_marginals(q)
    joint = estimate_joint(q, (m1, m2)).table
    return entropy(marginals.row(m1)) + entropy(marginals.row(m2)) - entropy(joint)


def mutual_information(q: DiscretizedBatch, m1: int, m2: int) -> float:
    """
    S(v_m1) + S(v_m2) - S(v_m1, v_m2), clamped at zero.

    Raises:
        ContractError: If m1 == m2
    """
    if m1 == m2:
        raise ContractError(f"mutual_information: variables must differ, got {m1} twice")
    return max(0.0, _raw_mutual_information(q, m1, m2))


@dataclass
class InfoSummary:
    """Information measures reported per epoch and by the verifier."""
    mean_entropy: float
    total_correlation_2: float
    max_pairwise_mi: float
    mean_pairwise_mi: float
    pairwise_mi: np.ndarray = field(repr=False)

    def as_dict(self) -> Dict[str, float]:
        return {
            "mean_entropy": self.mean_entropy,
            "total_correlation_2": self.total_correlation_2,
            "max_pairwise_mi": self.max_pairwise_mi,
            "mean_pairwise_mi": self.mean_pairwise_mi,
        }


def summarize(q: DiscretizedBatch) -> InfoSummary:
    """S(1), C(2) and pairwise MI statistics of a batch in one pass."""
    m = q.layout.variables
    marginals = estimate_marginals(q)
    single = [entropy(marginals.row(i)) for i in range(m)]
    mean_entropy = float(sum(single) / m)
    if m < 2:
        return InfoSummary(mean_entropy, 0.0, 0.0, 0.0, np.zeros((1, 1)))

    raw = np.zeros((m, m))
    pair_entropies = []
    for a, b in itertools.combinations(range(m), 2):
        joint_entropy = entropy(estimate_joint(q, (a, b)).table)
        pair_entropies.append(joint_entropy)
        raw[a, b] = raw[b, a] = single[a] + single[b] - joint_entropy
    clamped = np.maximum(raw, 0.0)
    upper = clamped[np.triu_indices(m, k=1)]
    return InfoSummary(
        mean_entropy=mean_entropy,
        total_correlation_2=2.0 * mean_entropy - float(sum(pair_entropies) / len(pair_entropies)),
        max_pairwise_mi=float(upper.max()),
        mean_pairwise_mi=float(upper.mean()),
        pairwise_mi=clamped,
    )
