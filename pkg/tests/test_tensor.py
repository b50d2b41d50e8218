import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from slnl import tensor as T
from slnl.gradcheck import check_gradients
from slnl.tensor import ContractError, ShapeError, Tape, Tensor, gradients, softmax


def leaf(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def test_arithmetic_matches_numpy(rng):
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4,))
    ta, tb = Tensor(a), Tensor(b)
    np.testing.assert_array_equal((ta + tb).data, a + b)
    np.testing.assert_array_equal((ta - tb).data, a - b)
    np.testing.assert_array_equal((ta * tb).data, a * b)
    np.testing.assert_array_equal((ta / (tb * tb + 1)).data, a / (b * b + 1))
    np.testing.assert_array_equal((2.0 - ta).data, 2.0 - a)
    np.testing.assert_array_equal((ta @ Tensor(a.T)).data, a @ a.T)
    np.testing.assert_array_equal(ta.T.data, a.T)


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
def test_broadcast_gradients_reduce_to_operand_shape(rng, op):
    a, b = leaf(rng, 2, 3, 4), leaf(rng, 3, 1)
    b.data = np.abs(b.data) + 0.5
    fn = getattr(T, op)
    probe = rng.normal(size=(2, 3, 4))
    res = check_gradients(lambda: (fn(a, b) * probe).sum(), [a, b], n_samples=40, rng=rng)
    assert res.ok, res.failures
    ga, gb = gradients(lambda: (fn(a, b) * probe).sum(), [a, b])
    assert ga.shape == a.shape and gb.shape == b.shape


@pytest.mark.parametrize("name", ["exp", "cos", "sin", "relu", "sigmoid", "neg"])
def test_unary_gradients(rng, name):
    x = leaf(rng, 3, 5)
    x.data[np.abs(x.data) < 1e-3] = 0.1  # keep relu away from its kink
    probe = rng.normal(size=(3, 5))
    res = check_gradients(lambda: (getattr(T, name)(x) * probe).sum(), [x], n_samples=15, rng=rng)
    assert res.ok, res.failures


def test_log_gradient(rng):
    x = Tensor(rng.uniform(0.5, 2.0, (4, 3)), requires_grad=True)
    res = check_gradients(lambda: T.log(x).sum(), [x], n_samples=12, rng=rng)
    assert res.ok


def test_structural_op_gradients(rng):
    x, y = leaf(rng, 2, 3, 4), leaf(rng, 2, 2, 4)
    w5 = rng.normal(size=(2, 5, 4))
    w24 = np.arange(24.0)
    w6 = rng.normal(size=(2, 3, 2))
    cases = {
        "concat": lambda: (T.concat([x, y], axis=1) * w5).sum(),
        "transpose": lambda: (T.transpose(x, (2, 0, 1)) * w24.reshape(4, 2, 3)).sum(),
        "reshape": lambda: (T.reshape(x, (6, 4)) * w24.reshape(6, 4)).sum(),
        "broadcast": lambda: (T.broadcast_to(y.sum(axis=1, keepdims=True), (2, 3, 4)) * x).sum(),
        "mean": lambda: (T.mean(x, axis=(0, 2)) * np.array([1.0, -2.0, 3.0])).sum(),
        "temporal_diff": lambda: (T.temporal_diff(x) * w24.reshape(2, 3, 4)).sum(),
        "matmul": lambda: (T.matmul(x, T.transpose(y, (0, 2, 1))) * w6).sum(),
    }
    for name, fn in cases.items():
        res = check_gradients(fn, [x, y], n_samples=30, rng=rng)
        assert res.ok, (name, res.failures)


def test_softmax_of_equal_scores_is_uniform():
    np.testing.assert_allclose(softmax(Tensor(np.full(5, 3.7))).data, np.full(5, 0.2), rtol=0, atol=1e-15)


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 8)),
              elements=st.floats(-700, 700, allow_nan=False)))
def test_softmax_rows_positive_and_normalized(z):
    p = softmax(Tensor(z)).data
    assert np.all(np.isfinite(p)) and np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)


@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-30, 30, allow_nan=False)))
def test_softmax_strictly_positive_for_moderate_scores(z):
    assert np.all(softmax(Tensor(z)).data > 0)


def test_softmax_gradient(rng):
    z = leaf(rng, 3, 6)
    probe = rng.normal(size=(3, 6))
    assert check_gradients(lambda: (softmax(z) * probe).sum(), [z], n_samples=18, rng=rng).ok


def test_sigmoid_is_stable_for_large_inputs():
    out = T.sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0]))).data
    np.testing.assert_array_equal(out, [0.0, 0.5, 1.0])


def test_temporal_diff_zero_pads_the_first_frame():
    x = np.arange(12.0).reshape(1, 4, 3) ** 2
    d = T.temporal_diff(Tensor(x)).data
    np.testing.assert_array_equal(d[:, 0], 0.0)
    np.testing.assert_array_equal(d[:, 1:], x[:, 1:] - x[:, :-1])


def test_backward_without_recorded_forward_is_a_contract_violation():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        pass
    with pytest.raises(ContractError):
        tape.backward(x)
    y = x * 2.0  # computed outside any tape
    with pytest.raises(ContractError):
        tape.backward(y)


def test_backward_on_another_tape_is_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape():
        y = (x * 2.0).sum()
    with Tape() as other:
        pass
    with pytest.raises(ContractError):
        other.backward(y)


def test_seed_shape_must_match_output():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(ShapeError):
        tape.backward(y, seed=np.ones(4))


def test_gradient_accumulates_over_reuse():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (g,) = gradients(lambda: (x * x + x).sum(), [x])
    np.testing.assert_array_equal(g, 2 * x.data + 1)


def test_backward_overwrites_previous_leaf_gradient():
    x = Tensor(np.array([3.0]), requires_grad=True)
    for _ in range(2):
        with Tape() as tape:
            y = (x * x).sum()
        tape.backward(y)
    np.testing.assert_array_equal(x.grad, [6.0])


def test_unreached_leaf_gets_zero_gradient():
    x, y = Tensor(np.ones(2)), Tensor(np.ones(3))
    gx, gy = gradients(lambda: (x * 3.0).sum(), [x, y])
    np.testing.assert_array_equal(gx, 3.0)
    np.testing.assert_array_equal(gy, 0.0)


def test_constants_do_not_receive_gradients():
    c = Tensor(np.ones(2))
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        y = (x * c).sum()
    tape.backward(y)
    assert c.grad is None and x.grad is not None


def test_matmul_batched_broadcast_gradient_shapes(rng):
    a, w = leaf(rng, 4, 2, 3), leaf(rng, 3, 5)
    ga, gw = gradients(lambda: T.matmul(a, w).sum(), [a, w])
    assert ga.shape == (4, 2, 3) and gw.shape == (3, 5)
    np.testing.assert_allclose(gw, a.data.sum(axis=(0, 1))[:, None] * np.ones((3, 5)))


def test_outputs_are_deterministic(rng):
    x = rng.normal(size=(3, 7))
    runs = [softmax(T.exp(Tensor(x)) @ Tensor(x.T)).data for _ in range(2)]
    assert np.array_equal(runs[0], runs[1])
