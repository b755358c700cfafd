"""Reverse-mode automatic differentiation over dense 2-D float64 matrices.

A :class:`Tape` records every operation in creation order, which is already a
topological order, so :meth:`Tape.backward` is a single reverse sweep. A tape is
built for one forward pass and consumed by one backward pass.
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.constants import ERROR_NON_FINITE, ERROR_SHAPE_MISMATCH, LOG_EPS
from core.exceptions import ContractError, DimensionError, LayoutError, NumericError

if TYPE_CHECKING:
    from imsvd.discretize import BlockLayout

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Var:
    """A node on a tape: a 2-D value, its gradient, and how it was produced."""

    __slots__ = ("tape", "id", "value", "grad", "op", "parents", "requires_grad", "name", "_backward")

    def __init__(
        self,
        tape: "Tape",
        node_id: int,
        value: np.ndarray,
        op: str,
        parents: Tuple["Var", ...],
        backward: Optional[BackwardFn],
        requires_grad: bool,
        name: Optional[str] = None,
    ):
        self.tape = tape
        self.id = node_id
        self.value = value
        self.grad: Optional[np.ndarray] = None
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self.name = name
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        """Return the value of a 1x1 variable as a Python float."""
        if self.value.shape != (1, 1):
            raise ContractError(f"item: expected a 1x1 value, got {self.value.shape}")
        return float(self.value[0, 0])

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"Var(id={self.id}, op={label}, shape={self.shape})"


class Tape:
    """Ordered record of operations for one forward/backward pass."""

    def __init__(self):
        self.nodes: List[Var] = []
        self._consumed = False

    @property
    def consumed(self) -> bool:
        return self._consumed

    def leaf(self, value, name: Optional[str] = None, requires_grad: bool = True) -> Var:
        """
        Register an input or parameter.

        The value is copied, so later in-place updates of the caller's array do
        not leak into the recorded forward pass.

        Args:
            value: Scalar, vector (treated as one row) or matrix
            name: Optional label used in error messages
            requires_grad: Whether gradients should be collected for it

        Returns:
            Leaf variable
        """
        matrix = _as_matrix(value)
        _check_finite("leaf", matrix)
        return self._append(matrix, "leaf", (), None, requires_grad, name)

    def constant(self, value, name: Optional[str] = None) -> Var:
        """Register a leaf that never receives gradients."""
        return self.leaf(value, name=name, requires_grad=False)

    def record(
        self,
        op: str,
        value: np.ndarray,
        parents: Tuple[Var, ...],
        backward: BackwardFn,
    ) -> Var:
        """Append an operation node whose inputs are already on this tape."""
        if self._consumed:
            raise ContractError(f"{op}: tape already consumed by backward; start a new tape")
        for parent in parents:
            if parent.tape is not self:
                raise ContractError(f"{op}: input {parent!r} belongs to a different tape")
        requires_grad = any(p.requires_grad for p in parents)
        return self._append(value, op, parents, backward, requires_grad, None)

    def _append(self, value, op, parents, backward, requires_grad, name) -> Var:
        var = Var(self, len(self.nodes), value, op, parents, backward, requires_grad, name)
        self.nodes.append(var)
        return var

    def backward(self, loss: Var) -> None:
        """
        Populate ``grad`` on every node with d(loss)/d(node).

        Leaves the loss does not depend on end up with zero gradients. A tape can
        be differentiated once; a second call is rejected.

        Args:
            loss: 1x1 variable recorded on this tape

        Raises:
            ContractError: If the loss is not scalar-shaped, lives on another
                tape, or the tape was already differentiated
        """
        if loss.tape is not self:
            raise ContractError("backward: loss belongs to a different tape")
        if loss.shape != (1, 1):
            raise ContractError(f"backward: loss must be 1x1, got {loss.shape}")
        if self._consumed:
            raise ContractError("backward: tape already consumed; gradients are not accumulated twice")
        self._consumed = True

        for node in self.nodes:
            node.grad = np.zeros_like(node.value)

        pending: Dict[int, np.ndarray] = {loss.id: np.ones((1, 1))}
        for node in reversed(self.nodes[: loss.id + 1]):
            upstream = pending.pop(node.id, None)
            if upstream is None:
                continue
            node.grad = upstream
            if node.is_leaf or not node.requires_grad:
                continue
            for parent, parent_grad in zip(node.parents, node._backward(upstream)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent.id in pending:
                    pending[parent.id] = pending[parent.id] + parent_grad
                else:
                    pending[parent.id] = parent_grad


def _as_matrix(value) -> np.ndarray:
    matrix = np.array(value, dtype=np.float64)
    if matrix.ndim == 0:
        return matrix.reshape(1, 1)
    if matrix.ndim == 1:
        return matrix.reshape(1, -1)
    if matrix.ndim != 2:
        raise DimensionError(f"leaf: expected at most 2 dimensions, got shape {matrix.shape}")
    return matrix


def _check_finite(op: str, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.isfinite(array).all():
            raise NumericError(ERROR_NON_FINITE.format(op=op))


def _same_shape(op: str, a: Var, b: Var) -> None:
    if a.shape != b.shape:
        raise DimensionError(ERROR_SHAPE_MISMATCH.format(op=op, left=a.shape, right=b.shape))


def matmul(a: Var, b: Var) -> Var:
    """Matrix product a·b."""
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    _check_finite("matmul", a.value, b.value)
    av, bv = a.value, b.value
    return a.tape.record("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a: Var, b: Var) -> Var:
    _same_shape("add", a, b)
    _check_finite("add", a.value, b.value)
    return a.tape.record("add", a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Var, b: Var) -> Var:
    _same_shape("sub", a, b)
    _check_finite("sub", a.value, b.value)
    return a.tape.record("sub", a.value - b.value, (a, b), lambda g: (g, -g))


def scale(a: Var, factor: float) -> Var:
    """Multiply every entry by a finite scalar."""
    factor = float(factor)
    if not np.isfinite(factor):
        raise NumericError("scale: non-finite factor")
    _check_finite("scale", a.value)
    return a.tape.record("scale", a.value * factor, (a,), lambda g: (g * factor,))


def hadamard(a: Var, b: Var) -> Var:
    """Elementwise product."""
    _same_shape("hadamard", a, b)
    _check_finite("hadamard", a.value, b.value)
    av, bv = a.value, b.value
    return a.tape.record("hadamard", av * bv, (a, b), lambda g: (g * bv, g * av))


def transpose(a: Var) -> Var:
    _check_finite("transpose", a.value)
    return a.tape.record("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))


def row_sum(a: Var) -> Var:
    """Sum each row, giving an (n, 1) column."""
    _check_finite("row_sum", a.value)
    cols = a.shape[1]
    return a.tape.record(
        "row_sum",
        a.value.sum(axis=1, keepdims=True),
        (a,),
        lambda g: (np.repeat(g, cols, axis=1),),
    )


def total_sum(a: Var) -> Var:
    _check_finite("total_sum", a.value)
    shape = a.shape
    return a.tape.record(
        "total_sum",
        np.array([[a.value.sum()]]),
        (a,),
        lambda g: (np.full(shape, g[0, 0]),),
    )


def mean(a: Var) -> Var:
    _check_finite("mean", a.value)
    shape = a.shape
    count = a.value.size
    return a.tape.record(
        "mean",
        np.array([[a.value.sum() / count]]),
        (a,),
        lambda g: (np.full(shape, g[0, 0] / count),),
    )


def relu(a: Var) -> Var:
    _check_finite("relu", a.value)
    mask = (a.value > 0).astype(np.float64)
    return a.tape.record("relu", a.value * mask, (a,), lambda g: (g * mask,))


def log_eps(a: Var, eps: float = LOG_EPS) -> Var:
    """
    ln(max(x, eps)).

    The derivative is 1/max(x, eps) for x > 0 and 0 where x <= 0, so clamped
    zeros of a probability table contribute nothing to the gradient.
    """
    _check_finite("log_eps", a.value)
    clamped = np.maximum(a.value, eps)
    local = np.where(a.value > 0, 1.0 / clamped, 0.0)
    return a.tape.record("log_eps", np.log(clamped), (a,), lambda g: (g * local,))


def exp(a: Var) -> Var:
    _check_finite("exp", a.value)
    with np.errstate(over="ignore"):
        out = np.exp(a.value)
    _check_finite("exp", out)
    return a.tape.record("exp", out, (a,), lambda g: (g * out,))


def block_softmax(z: Var, layout: "BlockLayout") -> Var:
    """
    Softmax over every contiguous block of ``layout.units`` columns.

    Args:
        z: (N, D) logits
        layout: Block layout with D = M * D_M

    Returns:
        (N, D) variable whose blocks each sum to one

    Raises:
        LayoutError: If the width does not match the layout
    """
    n, width = z.shape
    if width % layout.units != 0:
        raise LayoutError(f"block_softmax: width {width} is not divisible by D_M={layout.units}")
    if width != layout.dim:
        raise LayoutError(f"block_softmax: width {width} does not match layout D={layout.dim}")
    _check_finite("block_softmax", z.value)

    blocks = z.value.reshape(n, layout.variables, layout.units)
    shifted = np.exp(blocks - blocks.max(axis=2, keepdims=True))
    soft = shifted / shifted.sum(axis=2, keepdims=True)

    def backward(g: np.ndarray):
        gb = g.reshape(n, layout.variables, layout.units)
        inner = (gb * soft).sum(axis=2, keepdims=True)
        return ((soft * (gb - inner)).reshape(n, width),)

    return z.tape.record("block_softmax", soft.reshape(n, width), (z,), backward)
