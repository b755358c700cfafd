"""
End-to-end acceptance checks.

The gradient fuzz suite always runs. The training runs on the default
synthetic world take minutes each and are marked slow; run them with
``pytest -m slow``.
"""
from typing import Dict, Tuple

import numpy as np
import pytest

from dataio.batching import MultiviewBatch
from dataio.world import AttributeWorldSpec, WorldDataset, generate_world
from eval.metrics import knn_eval
from eval.theorem import TheoremReport, theorem_verify
from imsvd.loss import LossVariant
from imsvd.model import encode_batched, init_params
from training.config import TrainConfig
from training.trainer import check_step_gradients, fit

FUZZ_VARIANTS = [LossVariant.FULL, LossVariant.DE_OE, LossVariant.OE_TI, LossVariant.DE_OE_TIC]
SEEDS = (0, 1, 2)
KNN_K = 20


@pytest.mark.parametrize("case", range(20))
def test_gradient_fuzz(case):
    """Test every parameter gradient of every variant on random small configurations."""
    rng = np.random.default_rng(500 + case)
    variables = int(rng.choice([2, 3, 4]))
    units = int(rng.choice([2, 4, 8]))
    n = int(rng.choice([4, 8, 16]))
    config = TrainConfig(
        batch_size=n, variables=variables, units=units, variant=FUZZ_VARIANTS[case % 4],
        lambda_=float(rng.uniform(0.5, 2.0)), encoder_hidden=(5,), representation_dim=4, projector_hidden=(),
    )
    params = init_params(config.architecture(3), seed=case)
    x = rng.normal(size=(n, 3))
    batch = MultiviewBatch(
        x1=x + 0.1 * rng.normal(size=x.shape),
        x2=x + 0.1 * rng.normal(size=x.shape),
        labels=np.zeros((n, 1), dtype=np.int64),
        indices=np.arange(n),
    )
    report = check_step_gradients(params, batch, config)
    assert report.max_relative_error < 1e-5, report


# Desk-scale training runs

def train_and_verify(world: WorldDataset, config: TrainConfig, seed: int) -> Tuple[TheoremReport, float]:
    result = fit(config, world.train)
    report = theorem_verify(result.params, world.test, policy=config.augment_policy, seed=seed)
    h_train, _ = encode_batched(result.params, world.train.x, 512)
    h_test, _ = encode_batched(result.params, world.test.x, 512)
    knn = knn_eval(h_train, world.train.attribute(0), h_test, world.test.attribute(0), KNN_K)
    return report, knn


@pytest.fixture(scope="module")
def default_runs() -> Dict[int, Tuple[WorldDataset, TheoremReport, float]]:
    runs = {}
    for seed in SEEDS:
        world = generate_world(AttributeWorldSpec(seed=seed))
        config = TrainConfig(seed_model=seed, seed_data=seed, seed_shuffle=seed)
        report, knn = train_and_verify(world, config, seed)
        runs[seed] = (world, report, knn)
    return runs


@pytest.mark.slow
def test_default_training_reaches_fixed_point_statistics(default_runs):
    """Test one-hot codes, uniform marginals, independence, invariance and distinct codes for 2 of 3 seeds."""
    passed = 0
    for _, report, _ in default_runs.values():
        passed += all([
            report.onehot_frac_090 >= 0.85,
            report.marginal_entropy_ratio >= 0.90,
            report.mean_pairwise_mi <= 0.05,
            report.ti_mean >= 0.90,
            report.collision_fraction is not None and report.collision_fraction <= 0.05,
        ])
    assert passed >= 2, {seed: run[1] for seed, run in default_runs.items()}


@pytest.mark.slow
def test_ablation_ordering(default_runs):
    """Test the full loss beats de-oe and oe-ti on kNN, and de-oe beats raw inputs."""
    world, _, knn_full = default_runs[0]
    scores = {}
    for variant in (LossVariant.DE_OE, LossVariant.OE_TI):
        _, scores[variant] = train_and_verify(world, TrainConfig(variant=variant), 0)
    raw = knn_eval(world.train.x, world.train.attribute(0), world.test.x, world.test.attribute(0), KNN_K)
    assert knn_full >= scores[LossVariant.DE_OE]
    assert knn_full >= scores[LossVariant.OE_TI]
    assert scores[LossVariant.DE_OE] > raw


@pytest.mark.slow
def test_invariance_term_alone_collapses():
    """Test that without the entropy terms most samples share codes across labels."""
    world = generate_world(AttributeWorldSpec(seed=0))
    config = TrainConfig(variant=LossVariant.TI_ONLY)
    report, _ = train_and_verify(world, config, 0)
    assert report.collision_fraction > 0.5


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
