"""Central finite-difference checks for tape gradients."""
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Tuple

import numpy as np

from core.exceptions import ContractError, NumericError
from engine.autodiff import Tape, Var

LossFn = Callable[[Tape, Dict[str, Var]], Var]

# Central differences at h=1e-5 carry roughly 1e-10 of round-off; smaller gaps are not errors.
DEFAULT_ATOL = 1e-9


@dataclass
class GradCheckReport:
    """Outcome of a gradient check."""
    max_relative_error: float
    worst_parameter: str
    worst_index: Tuple[int, ...]
    analytic: float
    numeric: float
    entries_checked: int
    max_raw_relative_error: float = 0.0  # same formula without the atol floor


def evaluate(loss_fn: LossFn, params: Mapping[str, np.ndarray]) -> float:
    """Run a forward pass on a fresh tape and return the scalar loss."""
    tape = Tape()
    leaves = {name: tape.leaf(value, name=name) for name, value in params.items()}
    value = loss_fn(tape, leaves).item()
    if not np.isfinite(value):
        raise NumericError(f"grad_check: loss evaluated to {value}")
    return value


def analytic_gradients(loss_fn: LossFn, params: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Gradients of the loss with respect to every named parameter, from the tape."""
    tape = Tape()
    leaves = {name: tape.leaf(value, name=name) for name, value in params.items()}
    loss = loss_fn(tape, leaves)
    if not np.isfinite(loss.item()):
        raise NumericError(f"grad_check: loss evaluated to {loss.item()}")
    tape.backward(loss)
    return {name: leaf.grad for name, leaf in leaves.items()}


def numeric_gradient(
    loss_fn: LossFn,
    params: Mapping[str, np.ndarray],
    name: str,
    h: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient for one named parameter."""
    base = np.array(params[name], dtype=np.float64)
    grad = np.zeros_like(base)
    trial = dict(params)
    for index in np.ndindex(*base.shape):
        bumped = base.copy()
        bumped[index] += h
        trial[name] = bumped
        f_plus = evaluate(loss_fn, trial)
        bumped[index] -= 2.0 * h
        f_minus = evaluate(loss_fn, trial)
        grad[index] = (f_plus - f_minus) / (2.0 * h)
    return grad


def grad_check_report(
    loss_fn: LossFn,
    params: Mapping[str, np.ndarray],
    h: float = 1e-5,
    atol: float = DEFAULT_ATOL,
) -> GradCheckReport:
    """
    Compare tape gradients with central differences over every parameter entry.

    The relative error of an entry is
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|), and 0 when the
    absolute gap is within ``atol``. The unfloored maximum is kept in
    ``max_raw_relative_error``.

    Args:
        loss_fn: Builds a 1x1 loss on the given tape from the named leaves
        params: Parameter arrays keyed by name
        h: Finite-difference step
        atol: Absolute gap treated as agreement

    Returns:
        Report naming the worst entry

    Raises:
        ContractError: If h is not positive
        NumericError: If the loss is not finite
    """
    if not h > 0:
        raise ContractError(f"grad_check: step must be positive, got {h}")

    analytic = analytic_gradients(loss_fn, params)
    report = GradCheckReport(0.0, "", (), 0.0, 0.0, 0)
    for name in params:
        numeric = numeric_gradient(loss_fn, params, name, h)
        exact = analytic[name].reshape(numeric.shape)
        gap = np.abs(exact - numeric)
        raw = gap / np.maximum(1e-8, np.abs(exact) + np.abs(numeric))
        errors = np.where(gap <= atol, 0.0, raw)
        if raw.size:
            report.max_raw_relative_error = max(report.max_raw_relative_error, float(raw.max()))
        report.entries_checked += errors.size
        if errors.size == 0:
            continue
        worst = np.unravel_index(int(np.argmax(errors)), errors.shape)
        if errors[worst] > report.max_relative_error or not report.worst_parameter:
            report.max_relative_error = float(errors[worst])
            report.worst_parameter = name
            report.worst_index = tuple(int(i) for i in worst)
            report.analytic = float(exact[worst])
            report.numeric = float(numeric[worst])
    return report


def grad_check(
    loss_fn: LossFn,
    params: Mapping[str, np.ndarray],
    h: float = 1e-5,
    atol: float = DEFAULT_ATOL,
) -> float:
    """Maximum relative error between tape and finite-difference gradients."""
    return grad_check_report(loss_fn, params, h, atol).max_relative_error
