"""CSV exports for inspection and plotting."""
import csv
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from core.exceptions import FormatError
from dataio.dataset import Dataset
from eval.metrics import nearest_neighbors
from imsvd.discretize import cross_joint, estimate_marginals
from imsvd.model import ModelParams, encode_batched

logger = logging.getLogger(__name__)


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise FormatError(f"cannot write export: {e}", path) from e
    return path


def marginals_path(joint_path: Union[str, Path]) -> Path:
    joint_path = Path(joint_path)
    return joint_path.with_name(f"{joint_path.stem}_marginals.csv")


def export_joint(
    params: ModelParams,
    dataset: Dataset,
    path: Union[str, Path],
    batch_size: int = 512,
    threads: int = 1,
) -> Tuple[Path, Path]:
    """
    Write the (M*D_M)^2 cross-joint matrix of identical clean views and the marginals.

    The marginals go next to the matrix as ``<stem>_marginals.csv``, one row
    per variable.

    Returns:
        (matrix path, marginals path)
    """
    path = Path(path)
    _, q = encode_batched(params, dataset.x, batch_size, threads)
    table = cross_joint(q, q)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path)

    marginals = estimate_marginals(q).p
    rows = [[f"m{m}"] + [repr(float(v)) for v in row] for m, row in enumerate(marginals)]
    side = _write_rows(marginals_path(path), ["variable"] + [f"d{d}" for d in range(q.layout.units)], rows)
    logger.info("Cross-joint matrix written to %s, marginals to %s", path, side)
    return path, side


def export_embeddings(
    params: ModelParams,
    dataset: Dataset,
    path: Union[str, Path],
    batch_size: int = 512,
    threads: int = 1,
) -> Path:
    """Per-sample labels, hard codes and encoder representations h."""
    h, q = encode_batched(params, dataset.x, batch_size, threads)
    codes = q.hard_codes()
    header: List[str] = [f"label_{g}" for g in range(dataset.labels.shape[1])]
    header += [f"code_{m}" for m in range(codes.shape[1])]
    header += [f"h_{j}" for j in range(h.shape[1])]
    rows = [
        [str(int(v)) for v in labels] + [str(int(c)) for c in code] + [repr(float(v)) for v in row]
        for labels, code, row in zip(dataset.labels, codes, h)
    ]
    return _write_rows(Path(path), header, rows)


def export_neighbors(
    params: ModelParams,
    reference: Dataset,
    queries: Dataset,
    path: Union[str, Path],
    k: int,
    batch_size: int = 512,
    threads: int = 1,
) -> Path:
    """Indices into ``reference`` of each query's k nearest neighbours in representation space."""
    h_ref, _ = encode_batched(params, reference.x, batch_size, threads)
    h_query, _ = encode_batched(params, queries.x, batch_size, threads)
    indices, _ = nearest_neighbors(h_ref, h_query, k)
    rows = [[str(i)] + [str(int(j)) for j in row] for i, row in enumerate(indices)]
    return _write_rows(Path(path), ["query"] + [f"neighbor_{r}" for r in range(1, k + 1)], rows)


def read_marginals(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        return np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    except (OSError, ValueError) as e:
        raise FormatError(f"cannot read marginals: {e}", path) from e
