"""Tests for the reverse-mode autodiff tape."""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.exceptions import ContractError, DimensionError, LayoutError, NumericError
from engine.autodiff import (
    Tape,
    add,
    block_softmax,
    exp,
    hadamard,
    log_eps,
    matmul,
    mean,
    relu,
    row_sum,
    scale,
    sub,
    total_sum,
    transpose,
)
from engine.gradcheck import grad_check
from imsvd.discretize import BlockLayout


def test_matmul_sum_gradients():
    """Test gradients of total_sum(a @ b) against the closed form."""
    rng = np.random.default_rng(0)
    a_value, b_value = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    tape = Tape()
    a, b = tape.leaf(a_value), tape.leaf(b_value)
    tape.backward(total_sum(matmul(a, b)))

    assert_allclose(a.grad, np.ones((3, 2)) @ b_value.T)
    assert_allclose(b.grad, a_value.T @ np.ones((3, 2)))


def test_matmul_matches_finite_differences():
    """Test a 3x4 by 4x2 product against central differences."""
    rng = np.random.default_rng(1)
    params = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4, 2))}
    weights = rng.normal(size=(3, 2))

    def loss(tape, leaves):
        return total_sum(hadamard(matmul(leaves["a"], leaves["b"]), tape.constant(weights)))

    assert grad_check(loss, params) < 1e-6


def test_shared_input_accumulates():
    """Test that a variable used twice receives the sum of both paths."""
    tape = Tape()
    x = tape.leaf([[1.0, 2.0, 3.0]])
    tape.backward(total_sum(add(x, x)))
    assert_array_equal(x.grad, np.full((1, 3), 2.0))


def test_unused_leaf_gets_zero_gradient():
    """Test that leaves the loss does not depend on end with zeros."""
    tape = Tape()
    used = tape.leaf([[1.0, 2.0]])
    unused = tape.leaf([[5.0], [6.0]])
    tape.backward(total_sum(used))
    assert_array_equal(unused.grad, np.zeros((2, 1)))


def test_constant_loss_has_zero_gradients():
    """Test that a loss not built from a parameter gives it zero gradient."""
    tape = Tape()
    p = tape.leaf(np.ones((2, 2)))
    c = tape.constant([[3.0]])
    tape.backward(scale(c, 2.0))
    assert_array_equal(p.grad, np.zeros((2, 2)))


def test_total_sum_gradient_is_ones():
    """Test d(sum x)/dx = 1."""
    tape = Tape()
    x = tape.leaf(np.arange(6.0).reshape(2, 3))
    tape.backward(total_sum(x))
    assert_array_equal(x.grad, np.ones((2, 3)))


def test_second_backward_rejected():
    """Test that a consumed tape cannot be differentiated again."""
    tape = Tape()
    x = tape.leaf([[1.0]])
    loss = scale(x, 3.0)
    tape.backward(loss)
    with pytest.raises(ContractError):
        tape.backward(loss)
    with pytest.raises(ContractError):
        scale(x, 2.0)


def test_backward_requires_scalar():
    """Test that a non-1x1 loss is rejected."""
    tape = Tape()
    x = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ContractError):
        tape.backward(x)


def test_foreign_tape_rejected():
    """Test mixing variables from two tapes."""
    a = Tape().leaf([[1.0]])
    b = Tape().leaf([[2.0]])
    with pytest.raises(ContractError):
        add(a, b)


def test_shape_mismatch():
    """Test shape errors for elementwise and product ops."""
    tape = Tape()
    a, b = tape.leaf(np.ones((2, 3))), tape.leaf(np.ones((3, 2)))
    with pytest.raises(DimensionError):
        add(a, b)
    with pytest.raises(DimensionError):
        hadamard(a, b)
    with pytest.raises(DimensionError):
        matmul(a, a)


def test_non_finite_inputs_rejected():
    """Test that NaN and inf are refused at the leaf and inside ops."""
    tape = Tape()
    with pytest.raises(NumericError):
        tape.leaf([[np.nan]])
    big = tape.leaf([[1000.0]])
    with pytest.raises(NumericError):
        exp(big)


def test_log_eps_clamps_zero():
    """Test ln(max(x, eps)) and its zero derivative at x = 0."""
    tape = Tape()
    x = tape.leaf([[0.0, 1.0, np.e]])
    y = log_eps(x)
    assert y.value[0, 0] == pytest.approx(np.log(1e-12))
    assert_allclose(y.value[0, 1:], [0.0, 1.0])
    tape.backward(total_sum(y))
    assert_allclose(x.grad, [[0.0, 1.0, 1.0 / np.e]])


def test_block_softmax_blocks_sum_to_one():
    """Test block sums and strict positivity."""
    layout = BlockLayout(3, 4)
    z = np.random.default_rng(2).normal(scale=5.0, size=(5, 12))
    q = block_softmax(Tape().constant(z), layout).value
    sums = q.reshape(5, 3, 4).sum(axis=2)
    assert np.abs(sums - 1.0).max() < 1e-12
    assert (q > 0).all()


def test_block_softmax_uniform_on_zero_logits():
    """Test that zero logits give 1/D_M everywhere."""
    q = block_softmax(Tape().constant(np.zeros((2, 6))), BlockLayout(2, 3)).value
    assert_allclose(q, np.full((2, 6), 1.0 / 3.0))


def test_block_softmax_large_logits_stable():
    """Test that huge logits saturate without overflow."""
    z = np.array([[1000.0, 0.0, -1000.0, 0.0]])
    q = block_softmax(Tape().constant(z), BlockLayout(2, 2)).value
    assert_allclose(q, [[1.0, 0.0, 0.0, 1.0]], atol=1e-300)


def test_block_softmax_layout_mismatch():
    """Test a width not divisible by D_M."""
    with pytest.raises(LayoutError):
        block_softmax(Tape().constant(np.zeros((2, 7))), BlockLayout(2, 3))
    with pytest.raises(LayoutError):
        block_softmax(Tape().constant(np.zeros((2, 9))), BlockLayout(2, 3))


@pytest.mark.parametrize("op_name", ["add", "sub", "hadamard", "transpose", "row_sum", "mean", "relu", "exp", "log_eps", "block_softmax"])
def test_op_gradients_match_finite_differences(op_name):
    """Test each differentiable op through a random linear readout."""
    rng = np.random.default_rng(sum(map(ord, op_name)))
    layout = BlockLayout(2, 3)
    shape = (4, 6)
    params = {"a": rng.uniform(0.2, 1.5, size=shape), "b": rng.uniform(0.2, 1.5, size=shape)}

    def build(tape, leaves):
        a, b = leaves["a"], leaves["b"]
        if op_name == "add":
            return add(a, b)
        if op_name == "sub":
            return sub(a, b)
        if op_name == "hadamard":
            return hadamard(a, b)
        if op_name == "transpose":
            return transpose(a)
        if op_name == "row_sum":
            return row_sum(a)
        if op_name == "mean":
            return mean(a)
        if op_name == "relu":
            return relu(sub(a, tape.constant(np.full(shape, 0.85))))
        if op_name == "exp":
            return exp(a)
        if op_name == "log_eps":
            return log_eps(a)
        return block_softmax(a, layout)

    readouts = {}

    def loss(tape, leaves):
        out = build(tape, leaves)
        if out.shape not in readouts:
            readouts[out.shape] = rng.normal(size=out.shape)
        return total_sum(hadamard(out, tape.constant(readouts[out.shape])))

    assert grad_check(loss, params) < 1e-5


def test_leaf_copies_value():
    """Test that mutating the source array does not change the recorded leaf."""
    source = np.ones((1, 2))
    tape = Tape()
    x = tape.leaf(source)
    source[0, 0] = 5.0
    assert x.value[0, 0] == 1.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
