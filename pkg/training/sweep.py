"""One-field sweeps: train and evaluate once per value of a TrainConfig field."""
import csv
import json
import logging
import time
from pathlib import Path
from typing import List, Optional, Sequence, Union

from pydantic import BaseModel, Field

from core.constants import DEFAULT_KNN_K
from core.exceptions import ConfigError, FormatError
from dataio.dataset import Dataset
from eval.eval_runner import run_evaluation
from training.config import TrainConfig
from training.trainer import fit

logger = logging.getLogger(__name__)

SWEEP_JSON = "sweep.json"
SWEEP_CSV = "sweep.csv"


class SweepRow(BaseModel):
    """Outcome of one setting; accuracies on the test split, times in seconds."""
    field: str
    value: str
    knn_raw: float
    knn_learned: float
    linear_probe: Optional[float] = None
    final_loss: Optional[float] = None
    onehot_frac_090: float
    max_pairwise_mi: float
    collision_fraction: Optional[float] = None
    train_seconds: float = Field(ge=0.0)
    mean_epoch_seconds: float = Field(ge=0.0, description="0 when no epoch ran")
    eval_seconds: float = Field(ge=0.0)
    run_dir: Optional[str] = None


def split_sweep_values(text: str) -> List[str]:
    """
    Values of ``--sweep-values``.

    Separated by ``;`` when one is present, so tuple fields can be swept
    (``64,64;128``), otherwise by ``,``.
    """
    separator = ";" if ";" in text else ","
    values = [value.strip() for value in text.split(separator) if value.strip()]
    if not values:
        raise ConfigError(f"no sweep values in {text!r}")
    return values


def sweep_configs(base: TrainConfig, field_name: str, values: Sequence[str]) -> List[TrainConfig]:
    """
    One validated config per value, all other fields taken from ``base``.

    Raises:
        ConfigError: If the field is unknown or a value is invalid
    """
    name = "lambda_" if field_name == "lambda" else field_name
    if name not in TrainConfig.model_fields:
        raise ConfigError(f"cannot sweep {field_name!r}: not a TrainConfig field")
    return [base.updated(**{name: value}) for value in values]


def run_sweep(
    base: TrainConfig,
    field_name: str,
    values: Sequence[str],
    train: Dataset,
    test: Dataset,
    out_dir: Optional[Union[str, Path]] = None,
    k: int = DEFAULT_KNN_K,
    attribute: int = 0,
    batch_size: int = 512,
    threads: int = 1,
) -> List[SweepRow]:
    """
    Train from scratch and evaluate for every value of one field.

    The data is loaded once by the caller; sweeping ``seed_data`` therefore
    does not regenerate it. Every setting trains into
    ``<out_dir>/<field>=<value>`` and the table lands in ``sweep.json`` and
    ``sweep.csv``.

    Args:
        base: Config every setting starts from
        field_name: TrainConfig field to vary (``lambda`` accepted)
        values: Raw values, validated like config-file entries
        train: Training and kNN reference split
        test: Query split
        out_dir: Output directory; nothing is written when None
        k: kNN neighbours
        attribute: Label column to evaluate
        batch_size: Encoding chunk size
        threads: Encoding workers

    Returns:
        One row per value, in the given order
    """
    configs = sweep_configs(base, field_name, values)
    out_path = Path(out_dir) if out_dir is not None else None
    rows: List[SweepRow] = []
    for value, config in zip(values, configs):
        run_dir = out_path / f"{field_name}={value.replace('/', '_')}" if out_path is not None else None
        logger.info("Sweep %s=%s (%d of %d)", field_name, value, len(rows) + 1, len(configs))

        started = time.perf_counter()
        result = fit(config, train, out_dir=run_dir)
        train_seconds = time.perf_counter() - started

        started = time.perf_counter()
        evaluation = run_evaluation(
            result.params, train, test, k=k, attribute=attribute,
            policy=config.augment_policy, batch_size=batch_size, threads=threads,
        )
        eval_seconds = time.perf_counter() - started

        scores = evaluation["results"]
        theorem = scores["theorem"]
        epochs = result.epoch_seconds
        row = SweepRow(
            field=field_name,
            value=value,
            knn_raw=scores["knn_raw"],
            knn_learned=scores["knn_learned"],
            linear_probe=scores["linear_probe"],
            final_loss=result.log[-1]["loss"] if result.log else None,
            onehot_frac_090=theorem["onehot_frac_090"],
            max_pairwise_mi=theorem["max_pairwise_mi"],
            collision_fraction=theorem["collision_fraction"],
            train_seconds=train_seconds,
            mean_epoch_seconds=sum(epochs) / len(epochs) if epochs else 0.0,
            eval_seconds=eval_seconds,
            run_dir=str(run_dir) if run_dir is not None else None,
        )
        logger.info(
            "Sweep %s=%s: knn %.4f (raw %.4f), train %.1fs, eval %.1fs",
            field_name, value, row.knn_learned, row.knn_raw, train_seconds, eval_seconds,
        )
        rows.append(row)

    if out_path is not None:
        save_sweep(rows, out_path)
    return rows


def save_sweep(rows: Sequence[SweepRow], directory: Union[str, Path]) -> Path:
    """Write ``sweep.json`` and ``sweep.csv``; returns the JSON path."""
    directory = Path(directory)
    json_path = directory / SWEEP_JSON
    try:
        directory.mkdir(parents=True, exist_ok=True)
        json_path.write_text(
            json.dumps([row.model_dump() for row in rows], indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        with open(directory / SWEEP_CSV, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(SweepRow.model_fields))
            writer.writeheader()
            for row in rows:
                writer.writerow({key: "" if value is None else value for key, value in row.model_dump().items()})
    except OSError as e:
        raise FormatError(f"cannot write sweep results: {e}", directory) from e
    logger.info("Sweep results saved to %s", json_path)
    return json_path


def print_sweep_table(rows: Sequence[SweepRow]) -> None:
    if not rows:
        return
    print("\n" + "=" * 72)
    print(f"SWEEP OVER {rows[0].field}")
    print("=" * 72)
    print(f"{'Value':<14} {'kNN raw':>9} {'kNN h':>9} {'Probe':>9} {'One-hot':>9} {'Train s':>9} {'Epoch s':>9}")
    print("-" * 72)
    for row in rows:
        probe = f"{row.linear_probe:>9.1%}" if row.linear_probe is not None else f"{'-':>9}"
        print(
            f"{row.value:<14} {row.knn_raw:>9.1%} {row.knn_learned:>9.1%} {probe} "
            f"{row.onehot_frac_090:>9.1%} {row.train_seconds:>9.1f} {row.mean_epoch_seconds:>9.2f}"
        )
    print("-" * 72)
