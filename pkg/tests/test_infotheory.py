"""Tests for entropy, total correlation and mutual information."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.exceptions import ContractError
from imsvd.discretize import BlockLayout, DiscretizedBatch
from imsvd.infotheory import (
    avg_subset_entropy,
    entropy,
    mutual_information,
    summarize,
    total_correlation,
)
from tests.fixtures.builders import fixed_point_batch, random_batch


def copied_variables_batch(units: int) -> DiscretizedBatch:
    """Two variables that always take the same hard value."""
    rows = []
    for d in range(units):
        row = np.zeros(2 * units)
        row[d] = row[units + d] = 1.0
        rows.append(row)
    return DiscretizedBatch(q=np.array(rows), layout=BlockLayout(2, units))


def test_entropy_known_values():
    """Test uniform, point-mass and zero-entry distributions."""
    assert entropy([0.5, 0.5]) == pytest.approx(np.log(2))
    assert entropy(np.full((2, 2), 0.25)) == pytest.approx(np.log(4))
    assert entropy([1.0, 0.0, 0.0]) == 0.0
    assert entropy([0.5, 0.5, 0.0]) == pytest.approx(np.log(2))


def test_entropy_rejects_invalid_tables():
    """Test negative entries, bad normalization and empty input."""
    with pytest.raises(ContractError):
        entropy([1.2, -0.2])
    with pytest.raises(ContractError):
        entropy([0.5, 0.6])
    with pytest.raises(ContractError):
        entropy([])


def test_entropy_tolerates_rounding():
    """Test a sum off by less than 1e-6 is accepted."""
    assert entropy([0.5, 0.5 + 5e-7]) == pytest.approx(np.log(2), abs=1e-5)


def test_fixed_point_measures():
    """Test maximal entropy and zero dependence over all one-hot combinations."""
    q = fixed_point_batch(3, 3)
    assert avg_subset_entropy(q, 1) == pytest.approx(np.log(3))
    assert avg_subset_entropy(q, 2) == pytest.approx(2 * np.log(3))
    assert total_correlation(q, 2) == pytest.approx(0.0, abs=1e-12)
    assert total_correlation(q, 3) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(q, 0, 2) == pytest.approx(0.0, abs=1e-12)


def test_copied_variables_share_all_information():
    """Test MI and TC of two identical variables equal their entropy."""
    q = copied_variables_batch(4)
    assert mutual_information(q, 0, 1) == pytest.approx(np.log(4))
    assert total_correlation(q, 2) == pytest.approx(np.log(4))


def test_mutual_information_symmetric_and_nonnegative():
    """Test I(a; b) = I(b; a) >= 0 on soft codes."""
    q = random_batch(40, BlockLayout(3, 3), seed=11, temperature=0.5)
    forward = mutual_information(q, 0, 2)
    backward = mutual_information(q, 2, 0)
    assert forward == pytest.approx(backward, abs=1e-12)
    assert forward >= 0.0


def test_mutual_information_rejects_same_variable():
    """Test m1 == m2."""
    with pytest.raises(ContractError):
        mutual_information(fixed_point_batch(2, 2), 1, 1)


def test_subset_order_bounds():
    """Test r below 1, above M and above the joint limit."""
    q = random_batch(6, BlockLayout(5, 2), seed=0)
    with pytest.raises(ContractError):
        avg_subset_entropy(q, 0)
    with pytest.raises(ContractError):
        total_correlation(random_batch(6, BlockLayout(2, 2)), 3)
    with pytest.raises(ContractError):
        avg_subset_entropy(q, 5)


def test_total_correlation_nonnegative_on_soft_codes():
    """Test C(r) >= 0 for r = 2 and 3."""
    q = random_batch(30, BlockLayout(4, 3), seed=5)
    assert total_correlation(q, 2) >= -1e-12
    assert total_correlation(q, 3) >= -1e-12


def test_summarize_matches_individual_measures():
    """Test the one-pass summary against the separate functions."""
    q = random_batch(25, BlockLayout(3, 4), seed=9, temperature=0.3)
    summary = summarize(q)
    assert summary.mean_entropy == pytest.approx(avg_subset_entropy(q, 1), abs=1e-12)
    assert summary.total_correlation_2 == pytest.approx(total_correlation(q, 2), abs=1e-12)
    pairs = [mutual_information(q, a, b) for a, b in ((0, 1), (0, 2), (1, 2))]
    assert summary.max_pairwise_mi == pytest.approx(max(pairs), abs=1e-12)
    assert summary.mean_pairwise_mi == pytest.approx(np.mean(pairs), abs=1e-12)
    assert_allclose(summary.pairwise_mi, summary.pairwise_mi.T)
    assert set(summary.as_dict()) == {"mean_entropy", "total_correlation_2", "max_pairwise_mi", "mean_pairwise_mi"}


def test_summarize_single_variable():
    """Test that one variable reports zero dependence."""
    summary = summarize(fixed_point_batch(1, 4))
    assert summary.mean_entropy == pytest.approx(np.log(4))
    assert summary.total_correlation_2 == 0.0
    assert summary.max_pairwise_mi == 0.0


@pytest.mark.parametrize("case", range(100))
def test_information_identities_fuzz(case):
    """Test C(2) = 2 S(1) - S(2), MI symmetry and entropy bounds on random batches."""
    rng = np.random.default_rng(1000 + case)
    layout = BlockLayout(int(rng.integers(2, 5)), int(rng.integers(2, 5)))
    q = random_batch(int(rng.integers(2, 17)), layout, seed=case, temperature=float(rng.uniform(0.2, 2.0)))
    s1, s2 = avg_subset_entropy(q, 1), avg_subset_entropy(q, 2)
    assert abs(total_correlation(q, 2) - (2 * s1 - s2)) < 1e-9
    assert 0.0 <= s1 <= np.log(layout.units) + 1e-9
    assert 0.0 <= s2 <= 2 * np.log(layout.units) + 1e-9
    a, b = rng.permutation(layout.variables)[:2]
    assert abs(mutual_information(q, a, b) - mutual_information(q, b, a)) < 1e-12


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
