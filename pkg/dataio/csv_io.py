"""CSV datasets: a header row, ``label*`` columns for labels, every other column a feature."""
import csv
from pathlib import Path
from typing import Union

import numpy as np

from core.exceptions import FormatError
from dataio.dataset import Dataset


def save_dataset_csv(dataset: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    header = [f"label_{g}" for g in range(dataset.labels.shape[1])]
    header += [f"x_{j}" for j in range(dataset.dim)]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for labels, row in zip(dataset.labels, dataset.x):
                writer.writerow([str(int(v)) for v in labels] + [repr(float(v)) for v in row])
    except OSError as e:
        raise FormatError(f"cannot write dataset: {e}", path) from e
    return path


def load_dataset_csv(path: Union[str, Path]) -> Dataset:
    """
    Read a CSV dataset.

    Raises:
        FormatError: On a missing header, no label or feature columns, ragged
            rows, or unparsable values
    """
    path = Path(path)
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise FormatError(f"cannot read dataset: {e}", path) from e
    if not rows:
        raise FormatError("missing header row", path)

    header = [h.strip() for h in rows[0]]
    label_cols = [i for i, h in enumerate(header) if h.lower().startswith("label")]
    feature_cols = [i for i in range(len(header)) if i not in label_cols]
    if not label_cols or not feature_cols:
        raise FormatError("need at least one label column and one feature column", path)

    body = [r for r in rows[1:] if r]
    labels = np.zeros((len(body), len(label_cols)), dtype=np.int64)
    x = np.zeros((len(body), len(feature_cols)))
    for n, row in enumerate(body, 2):
        if len(row) != len(header):
            raise FormatError(f"line {n}: expected {len(header)} fields, got {len(row)}", path)
        try:
            labels[n - 2] = [int(row[i]) for i in label_cols]
            x[n - 2] = [float(row[i]) for i in feature_cols]
        except ValueError as e:
            raise FormatError(f"line {n}: {e}", path) from e
    return Dataset(x=x, labels=labels, name=path.name, meta={"source": "csv"})
