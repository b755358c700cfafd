"""Evaluation runner: kNN, linear probe and verifier for one checkpoint."""
import json
import logging
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from core.constants import DEFAULT_KNN_K
from core.error_handler import safe_execute
from core.exceptions import ContractError, FormatError
from dataio.augment import AugmentPolicy
from dataio.dataset import Dataset
from eval.metrics import ProbeConfig, knn_eval, linear_probe
from eval.theorem import theorem_verify
from imsvd.model import ModelParams, encode_batched

logger = logging.getLogger(__name__)


def run_evaluation(
    params: ModelParams,
    train: Dataset,
    test: Dataset,
    k: int = DEFAULT_KNN_K,
    attribute: int = 0,
    probe_config: ProbeConfig = ProbeConfig(),
    policy: AugmentPolicy = AugmentPolicy(),
    batch_size: int = 512,
    threads: int = 1,
) -> Dict:
    """
    Evaluate a trained model on one attribute.

    kNN runs on raw inputs as a baseline and on encoder outputs h. The probe
    is best-effort: a single-class split is logged and reported as null.

    Args:
        params: Trained parameters
        train: Reference split
        test: Query split
        k: kNN neighbours
        attribute: Label column to classify
        probe_config: Linear probe protocol
        policy: Augmentation for the verifier's paired views
        batch_size: Encoding chunk size
        threads: Encoding workers

    Returns:
        Results dictionary with ``results`` and ``aggregate`` sections
    """
    y_train, y_test = train.attribute(attribute), test.attribute(attribute)
    h_train, _ = encode_batched(params, train.x, batch_size, threads)
    h_test, _ = encode_batched(params, test.x, batch_size, threads)

    logger.info("Running evaluation on %d train / %d test samples (attribute %d)", train.n, test.n, attribute)
    knn_raw = knn_eval(train.x, y_train, test.x, y_test, k)
    knn_learned = knn_eval(h_train, y_train, h_test, y_test, k)
    probe = safe_execute(
        linear_probe, h_train, y_train, h_test, y_test, probe_config,
        default_return=None, exception_type=ContractError,
    )
    report = theorem_verify(params, test, batch_size=batch_size, policy=policy, threads=threads)

    results = {
        "knn_raw": knn_raw,
        "knn_learned": knn_learned,
        "linear_probe": probe,
        "theorem": report.model_dump(),
    }
    aggregate = {
        "k": k,
        "attribute": attribute,
        "train_samples": train.n,
        "test_samples": test.n,
        "knn_gain": knn_learned - knn_raw,
        "chance": 1.0 / max(1, int(np.unique(y_train).shape[0])),
    }
    return {"results": results, "aggregate": aggregate}


def print_summary_table(eval_results: Dict) -> None:
    """Print a summary table of evaluation results."""
    results = eval_results["results"]
    aggregate = eval_results["aggregate"]
    theorem = results["theorem"]

    print("\n" + "=" * 60)
    print("EVALUATION SUMMARY")
    print("=" * 60)
    print(f"\nAttribute: {aggregate['attribute']}  k: {aggregate['k']}")
    print(f"Train samples: {aggregate['train_samples']}  Test samples: {aggregate['test_samples']}")

    print("\n" + "-" * 60)
    print(f"{'Metric':<30} {'Score':>10}")
    print("-" * 60)
    print(f"{'kNN (raw inputs)':<30} {results['knn_raw']:>9.1%}")
    print(f"{'kNN (learned h)':<30} {results['knn_learned']:>9.1%}")
    if results["linear_probe"] is not None:
        print(f"{'Linear probe':<30} {results['linear_probe']:>9.1%}")
    print(f"{'Chance':<30} {aggregate['chance']:>9.1%}")
    print(f"{'One-hot > 0.9':<30} {theorem['onehot_frac_090']:>9.1%}")
    print(f"{'One-hot > 0.99':<30} {theorem['onehot_frac_099']:>9.1%}")
    print(f"{'Marginal entropy ratio':<30} {theorem['marginal_entropy_ratio']:>10.4f}")
    print(f"{'Max pairwise MI (nats)':<30} {theorem['max_pairwise_mi']:>10.4f}")
    print(f"{'TI inner product mean':<30} {theorem['ti_mean']:>10.4f}")
    if theorem.get("collision_fraction") is not None:
        print(f"{'Code collision fraction':<30} {theorem['collision_fraction']:>9.1%}")
    print("-" * 60)


def save_results(eval_results: Dict, output_path: Union[str, Path]) -> Path:
    """Save evaluation results to a JSON file."""
    output_path = Path(output_path)
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w") as f:
            json.dump(eval_results, f, indent=2, sort_keys=True)
    except OSError as e:
        raise FormatError(f"cannot save results: {e}", output_path) from e
    logger.info("Results saved to %s", output_path)
    return output_path


def load_results(path: Union[str, Path]) -> Optional[Dict]:
    path = Path(path)
    if not path.exists():
        return None
    with open(path) as f:
        return json.load(f)
