"""Soft variable discretization and empirical distribution estimation.

An embedding of width D = M * D_M is read as M categorical variables with D_M
values each. A block softmax turns every block into a relaxed one-hot vector;
averaging over the batch gives marginal, joint and cross-joint tables.
"""
import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from core.constants import ERROR_EMPTY_BATCH, MAX_JOINT_ORDER
from core.exceptions import CapacityError, ContractError, DimensionError, FormatError, LayoutError
from engine.autodiff import Tape, Var, block_softmax, matmul, scale, transpose

BLOCK_SUM_TOL = 1e-10
_LABEL = re.compile(r"^m(\d+):d(\d+)$")


@dataclass(frozen=True)
class BlockLayout:
    """
    Block structure of an embedding vector.

    Attributes:
        variables: M, the number of discrete variables
        units: D_M, the number of values per variable
    """
    variables: int
    units: int

    def __post_init__(self):
        if self.variables < 1:
            raise LayoutError(f"layout needs at least one variable, got M={self.variables}")
        if self.units < 2:
            raise LayoutError(f"layout needs at least two units per variable, got D_M={self.units}")

    @property
    def dim(self) -> int:
        """D = M * D_M."""
        return self.variables * self.units

    def block_slice(self, m: int) -> slice:
        return slice(m * self.units, (m + 1) * self.units)

    def block_indicator(self) -> np.ndarray:
        """(D, M) 0/1 matrix mapping each unit to its variable."""
        return np.kron(np.eye(self.variables), np.ones((self.units, 1)))

    def check_width(self, width: int, op: str) -> None:
        if width % self.units != 0:
            raise LayoutError(f"{op}: width {width} is not divisible by D_M={self.units}")
        if width != self.dim:
            raise LayoutError(f"{op}: width {width} does not match layout D={self.dim}")


@dataclass
class DiscretizedBatch:
    """Soft one-hot activations q, stored as an (N, D) matrix in block layout."""
    q: np.ndarray
    layout: BlockLayout

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        if self.q.ndim != 2:
            raise DimensionError(f"DiscretizedBatch: expected (N, D), got shape {self.q.shape}")
        self.layout.check_width(self.q.shape[1], "DiscretizedBatch")
        if self.q.shape[0] == 0:
            raise ContractError(ERROR_EMPTY_BATCH.format(op="DiscretizedBatch"))
        if self.q.min() < 0.0 or self.q.max() > 1.0:
            raise ContractError("DiscretizedBatch: activations must lie in [0, 1]")
        sums = self.blocks.sum(axis=2)
        if np.abs(sums - 1.0).max() > BLOCK_SUM_TOL:
            raise ContractError("DiscretizedBatch: every block must sum to 1")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def blocks(self) -> np.ndarray:
        """(N, M, D_M) view of q."""
        return self.q.reshape(self.n, self.layout.variables, self.layout.units)

    def variable(self, m: int) -> np.ndarray:
        """(N, D_M) soft assignments of variable m."""
        return self.q[:, self.layout.block_slice(m)]

    def hard_codes(self) -> np.ndarray:
        """(N, M) argmax unit of every block."""
        return self.blocks.argmax(axis=2)


@dataclass
class MarginalTable:
    """p(m, d): per-variable value probabilities, shape (M, D_M)."""
    p: np.ndarray

    def row(self, m: int) -> np.ndarray:
        return self.p[m]


@dataclass
class JointTable:
    """Joint distribution of an ordered subset of variables."""
    variables: Tuple[int, ...]
    table: np.ndarray

    @property
    def order(self) -> int:
        return len(self.variables)

    def marginal(self, axis: int) -> np.ndarray:
        """Sum out every axis except ``axis``."""
        others = tuple(i for i in range(self.order) if i != axis)
        return self.table.sum(axis=others) if others else self.table


@dataclass
class CrossJointTable:
    """
    Block matrix of cross-joint probabilities.

    Block (m1, m2), entry (d1, d2) holds the batch average of
    q1(m1, d1) * q2(m2, d2); view 1 on rows, view 2 on columns.
    """
    matrix: np.ndarray
    layout: BlockLayout

    def block(self, m1: int, m2: int) -> np.ndarray:
        return self.matrix[self.layout.block_slice(m1), self.layout.block_slice(m2)]

    def block_sums(self) -> np.ndarray:
        """(M, M) total probability of every block."""
        m, d = self.layout.variables, self.layout.units
        return self.matrix.reshape(m, d, m, d).sum(axis=(1, 3))

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write the matrix row-major with ``m<i>:d<j>`` row and column labels."""
        path = Path(path)
        labels = unit_labels(self.layout)
        try:
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["unit"] + labels)
                for label, row in zip(labels, self.matrix):
                    writer.writerow([label] + [repr(float(v)) for v in row])
        except OSError as e:
            raise FormatError(f"cannot write cross-joint matrix: {e}", path) from e
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "CrossJointTable":
        """Read a matrix written by :meth:`to_csv`; the layout is recovered from the labels."""
        path = Path(path)
        try:
            with open(path, newline="") as f:
                rows = list(csv.reader(f))
        except OSError as e:
            raise FormatError(f"cannot read cross-joint matrix: {e}", path) from e
        if not rows:
            raise FormatError("empty cross-joint CSV", path)
        layout = _layout_from_labels(rows[0][1:], path)
        body = rows[1:]
        if len(body) != layout.dim or any(len(r) != layout.dim + 1 for r in body):
            raise FormatError(f"expected a {layout.dim}x{layout.dim} matrix", path)
        try:
            matrix = np.array([[float(v) for v in r[1:]] for r in body])
        except ValueError as e:
            raise FormatError(f"bad matrix entry: {e}", path) from e
        return cls(matrix=matrix, layout=layout)


def unit_labels(layout: BlockLayout) -> List[str]:
    return [f"m{m}:d{d}" for m in range(layout.variables) for d in range(layout.units)]


def _layout_from_labels(labels: Sequence[str], path: Path) -> BlockLayout:
    parsed = []
    for label in labels:
        match = _LABEL.match(label)
        if not match:
            raise FormatError(f"bad unit label {label!r}", path)
        parsed.append((int(match.group(1)), int(match.group(2))))
    if not parsed:
        raise FormatError("no unit columns", path)
    variables = max(m for m, _ in parsed) + 1
    units = max(d for _, d in parsed) + 1
    layout = BlockLayout(variables, units)
    if parsed != [(m, d) for m in range(variables) for d in range(units)]:
        raise FormatError("unit labels are not in block order", path)
    return layout


def discretize_var(z: Var, layout: BlockLayout) -> Var:
    """Tape-backed block softmax of projector outputs."""
    return block_softmax(z, layout)


def discretize_batch(z: np.ndarray, layout: BlockLayout) -> DiscretizedBatch:
    """
    Block-softmax projector outputs outside of training.

    Shares the tape implementation so both paths agree bitwise.

    Args:
        z: (N, D) projector outputs
        layout: Block layout

    Returns:
        Discretized batch

    Raises:
        NumericError: If z holds non-finite values
        LayoutError: If the width does not match the layout
    """
    tape = Tape()
    q = discretize_var(tape.constant(z), layout)
    return DiscretizedBatch(q=q.value, layout=layout)


def _sequential_mean(rows: np.ndarray) -> np.ndarray:
    # Samples are accumulated strictly in batch order.
    total = np.zeros(rows.shape[1:])
    for row in rows:
        total = total + row
    return total / rows.shape[0]


def estimate_marginals(q: DiscretizedBatch) -> MarginalTable:
    """p(m, d) = (1/N) sum_i q_i(m, d)."""
    if q.n < 1:
        raise ContractError(ERROR_EMPTY_BATCH.format(op="estimate_marginals"))
    return MarginalTable(p=_sequential_mean(q.blocks))


def estimate_joint(
    q: DiscretizedBatch,
    variables: Sequence[int],
    allow_duplicates: bool = False,
) -> JointTable:
    """
    Joint distribution of a subset of variables.

    Entry (d1, ..., dr) = (1/N) sum_i prod_j q_i(m_j, d_j). Samples are summed in
    batch order and factors multiplied left to right.

    Args:
        q: Discretized batch
        variables: Indices (m1, ..., mr)
        allow_duplicates: Permit repeated indices (degenerate self-joint)

    Returns:
        Joint table with one axis per requested variable

    Raises:
        CapacityError: If more than four variables are requested
        ContractError: For empty, out-of-range or repeated indices
    """
    variables = tuple(int(m) for m in variables)
    if not variables:
        raise ContractError("estimate_joint: at least one variable is required")
    if len(variables) > MAX_JOINT_ORDER:
        raise CapacityError(
            f"estimate_joint: order {len(variables)} exceeds the limit of {MAX_JOINT_ORDER}"
        )
    if len(variables) > q.layout.variables and not allow_duplicates:
        raise ContractError(
            f"estimate_joint: order {len(variables)} exceeds M={q.layout.variables}"
        )
    for m in variables:
        if not 0 <= m < q.layout.variables:
            raise ContractError(f"estimate_joint: variable index {m} out of range")
    if len(set(variables)) != len(variables) and not allow_duplicates:
        raise ContractError(f"estimate_joint: duplicate indices {variables}")

    blocks = q.blocks
    shape = (q.layout.units,) * len(variables)
    total = np.zeros(shape)
    for sample in blocks:
        outer = sample[variables[0]]
        for m in variables[1:]:
            outer = np.multiply.outer(outer, sample[m])
        total = total + outer
    return JointTable(variables=variables, table=total / q.n)


def cross_joint(q1: DiscretizedBatch, q2: DiscretizedBatch) -> CrossJointTable:
    """
    C = (1/N) Q1^T Q2 over two views of the same batch.

    Raises:
        ContractError: If batch sizes or layouts differ
    """
    if q1.layout != q2.layout:
        raise ContractError(f"cross_joint: layouts differ, {q1.layout} vs {q2.layout}")
    if q1.n != q2.n:
        raise ContractError(f"cross_joint: batch sizes differ, {q1.n} vs {q2.n}")
    return CrossJointTable(matrix=(q1.q.T @ q2.q) / q1.n, layout=q1.layout)


def cross_joint_var(q1: Var, q2: Var) -> Var:
    """Tape-backed cross-joint matrix of two (N, D) views."""
    if q1.shape != q2.shape:
        raise ContractError(f"cross_joint: view shapes differ, {q1.shape} vs {q2.shape}")
    return scale(matmul(transpose(q1), q2), 1.0 / q1.shape[0])
