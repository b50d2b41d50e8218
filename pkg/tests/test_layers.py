import numpy as np
import pytest
from hypothesis import given, strategies as st

from slnl.gradcheck import check_gradients
from slnl.layers import BatchNormParams, batchnorm, conv2d, dense, dropout, global_avg_pool, maxpool2
from slnl.oracles import direct_conv2d
from slnl.tensor import ShapeError, Tensor


def test_one_by_one_unit_kernel_is_identity(rng):
    x = rng.normal(size=(1, 4, 5))
    np.testing.assert_array_equal(conv2d(x, np.ones((1, 1, 1, 1)), np.zeros(1)).data, x)


def test_all_ones_kernel_sums_the_neighbourhood():
    out = conv2d(np.ones((1, 4, 4)), np.ones((1, 1, 3, 3))).data
    assert out[0, 1, 1] == 9.0
    assert out[0, 0, 0] == 4.0  # corner loses the padded cells
    assert out[0, 0, 1] == 6.0


def test_conv_matches_loop_oracle(rng):
    x = rng.normal(size=(3, 5, 4))
    w, b = rng.normal(size=(2, 3, 3, 1)), rng.normal(size=2)
    np.testing.assert_allclose(conv2d(x, w, b).data, direct_conv2d(x, w, b), atol=1e-12)


@given(st.integers(1, 3), st.integers(1, 3), st.sampled_from([1, 3, 5]), st.sampled_from([1, 3]),
       st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_conv_matches_oracle_for_any_odd_kernel(c_in, c_out, kt, kn, t, n, seed):
    r = np.random.default_rng(seed)
    x, w, b = r.normal(size=(c_in, t, n)), r.normal(size=(c_out, c_in, kt, kn)), r.normal(size=c_out)
    np.testing.assert_allclose(conv2d(x, w, b).data, direct_conv2d(x, w, b), atol=1e-10)


def test_conv_batched_equals_per_sample(rng):
    x, w = rng.normal(size=(3, 2, 4, 4)), rng.normal(size=(2, 2, 3, 3))
    batched = conv2d(x, w).data
    for i in range(3):
        np.testing.assert_allclose(batched[i], conv2d(x[i], w).data, atol=1e-13)


def test_conv_shape_errors(rng):
    with pytest.raises(ShapeError):
        conv2d(rng.normal(size=(2, 4, 4)), rng.normal(size=(1, 3, 3, 3)))
    with pytest.raises(ShapeError):
        conv2d(rng.normal(size=(2, 4, 4)), rng.normal(size=(1, 2, 2, 3)))


def test_conv_gradients(rng):
    x = Tensor(rng.normal(size=(2, 2, 4, 5)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 2, 3, 1)), requires_grad=True)
    b = Tensor(rng.normal(size=3), requires_grad=True)
    probe = rng.normal(size=(2, 3, 4, 5))
    assert check_gradients(lambda: (conv2d(x, w, b) * probe).sum(), [x, w, b], n_samples=60, rng=rng).ok


def test_dense_matches_matmul_and_checks_shape(rng):
    x, w, b = rng.normal(size=(4, 3)), rng.normal(size=(2, 3)), rng.normal(size=2)
    np.testing.assert_allclose(dense(x, w, b).data, x @ w.T + b)
    with pytest.raises(ShapeError):
        dense(x, rng.normal(size=(2, 5)))


def test_maxpool_picks_window_maxima_and_floors_odd_extents():
    x = np.arange(30.0).reshape(1, 5, 6)
    out = maxpool2(x).data
    assert out.shape == (1, 2, 3)
    np.testing.assert_array_equal(out[0], [[7, 9, 11], [19, 21, 23]])
    with pytest.raises(ShapeError):
        maxpool2(np.zeros((1, 1, 4)))


def test_maxpool_gradient_routes_to_argmax(rng):
    x = Tensor(rng.normal(size=(2, 5, 4)), requires_grad=True)
    probe = rng.normal(size=(2, 2, 2))
    assert check_gradients(lambda: (maxpool2(x) * probe).sum(), [x], n_samples=40, rng=rng).ok


def test_global_average_pool(rng):
    x = Tensor(rng.normal(size=(2, 3, 4, 5)), requires_grad=True)
    np.testing.assert_allclose(global_avg_pool(x).data, x.data.mean(axis=(2, 3)))
    probe = rng.normal(size=(2, 3))
    assert check_gradients(lambda: (global_avg_pool(x) * probe).sum(), [x], n_samples=30, rng=rng).ok


def test_batchnorm_train_normalizes_and_updates_running_stats(rng):
    x = rng.normal(3.0, 2.0, size=(8, 2, 3, 3))
    bn = BatchNormParams.init(2)
    out = batchnorm(x, bn, "train").data
    np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.var(axis=(0, 2, 3)), x.var(axis=(0, 2, 3)) / (x.var(axis=(0, 2, 3)) + 1e-5))
    np.testing.assert_allclose(bn.running_mean.data, 0.1 * x.mean(axis=(0, 2, 3)))
    np.testing.assert_allclose(bn.running_var.data, 0.9 + 0.1 * x.var(axis=(0, 2, 3)))


def test_batchnorm_eval_uses_running_stats_and_is_stateless(rng):
    bn = BatchNormParams.init(2)
    bn.running_mean.data = np.array([1.0, -1.0])
    bn.running_var.data = np.array([4.0, 0.25])
    x = rng.normal(size=(3, 2, 2, 2))
    out = batchnorm(x, bn, "eval").data
    expect = (x - bn.running_mean.data[None, :, None, None]) / np.sqrt(
        bn.running_var.data[None, :, None, None] + 1e-5)
    np.testing.assert_allclose(out, expect)
    np.testing.assert_array_equal(bn.running_mean.data, [1.0, -1.0])
    with pytest.raises(ValueError):
        batchnorm(x, bn, "test")
    with pytest.raises(ShapeError):
        batchnorm(rng.normal(size=(3, 4, 2)), bn)


def test_dropout_is_inverted_and_seeded(rng):
    x = np.ones((200, 50))
    a = dropout(x, 0.2, "train", seed=5).data
    b = dropout(x, 0.2, "train", seed=5).data
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 1.25}
    assert abs(a.mean() - 1.0) < 0.02
    np.testing.assert_array_equal(dropout(x, 0.2, "eval").data, x)
    with pytest.raises(ValueError):
        dropout(x, 1.0, "train", seed=0)
