import numpy as np
import pytest
from hypothesis import given, strategies as st

from slnl.gradcheck import check_gradients
from slnl.tensor import ShapeError, Tensor
from slnl.transform import TransformParams, coordinate_transform, skeleton_transform, transform_forward


def params(joint, coord, bias=None):
    joint = np.asarray(joint, float)
    bias = np.zeros(joint.shape[0]) if bias is None else bias
    return TransformParams(Tensor(joint), Tensor(bias), Tensor(np.asarray(coord, float)))


def test_identity_joint_map_is_identity(rng):
    x = rng.normal(size=(3, 4, 5))
    np.testing.assert_array_equal(skeleton_transform(x, params(np.eye(5), np.eye(3)[None])).data, x)


def test_permutation_reorders_joints(rng):
    x = rng.normal(size=(2, 4, 5))
    perm = np.array([3, 0, 4, 1, 2])
    out = skeleton_transform(x, params(np.eye(5)[perm], np.eye(2)[None])).data
    np.testing.assert_array_equal(out, x[:, :, perm])


def test_random_joint_map_matches_per_frame_products(rng):
    x, w, b = rng.normal(size=(3, 4, 5)), rng.normal(size=(7, 5)), rng.normal(size=7)
    out = skeleton_transform(x, params(w, np.eye(3)[None], b)).data
    expect = np.empty((3, 4, 7))
    for c in range(3):
        for t in range(4):
            expect[c, t] = w @ x[c, t] + b
    assert np.abs(out - expect).max() < 1e-12


def test_single_identity_coordinate_system_is_identity(rng):
    x = rng.normal(size=(3, 4, 6))
    np.testing.assert_array_equal(coordinate_transform(x, params(np.eye(6), np.eye(3)[None])).data, x)


def test_two_systems_stack_channels(rng):
    x = rng.normal(size=(2, 4, 5))
    out = coordinate_transform(x, params(np.eye(5), [np.eye(2), 2 * np.eye(2)])).data
    np.testing.assert_array_equal(out, np.concatenate([x, 2 * x]))


def test_full_scale_shape(rng):
    p = TransformParams.init(3, 25, 64, 10, rng)
    assert transform_forward(rng.normal(size=(3, 20, 25)), p).shape == (30, 20, 64)


@given(st.integers(1, 3), st.integers(1, 5), st.integers(1, 6), st.integers(1, 8), st.integers(1, 4),
       st.integers(0, 2 ** 32 - 1))
def test_shape_contract_and_linearity(d, t, n, n_aug, k, seed):
    r = np.random.default_rng(seed)
    p = TransformParams.init(d, n, n_aug, k, r, noise=0.5)
    x = r.normal(size=(d, t, n))
    out = transform_forward(x, p).data
    assert out.shape == (k * d, t, n_aug)
    alpha = r.normal()
    assert np.abs(transform_forward(alpha * x, p).data - alpha * out).max() < 1e-12 * max(1, np.abs(out).max())


def test_coordinate_maps_are_oblique_not_orthogonal(rng):
    p = TransformParams.init(2, 4, 4, 3, rng, noise=0.05)
    for m in p.coord_weight.data:
        assert not np.allclose(m @ m.T, np.eye(2))
        assert np.abs(m - np.eye(2)).max() <= 0.05


def test_batched_input(rng):
    p = TransformParams.init(2, 5, 6, 2, rng)
    xb = rng.normal(size=(3, 2, 4, 5))
    out = transform_forward(xb, p).data
    for i in range(3):
        np.testing.assert_allclose(out[i], transform_forward(xb[i], p).data, atol=1e-14)


def test_shape_errors(rng):
    p = TransformParams.init(2, 5, 6, 2, rng)
    with pytest.raises(ShapeError):
        skeleton_transform(rng.normal(size=(2, 4, 4)), p)
    with pytest.raises(ShapeError):
        coordinate_transform(rng.normal(size=(3, 4, 6)), p)


def test_gradients_of_both_weight_families(rng):
    p = TransformParams.init(3, 5, 6, 2, rng, noise=0.5)
    x = Tensor(rng.normal(size=(2, 3, 4, 5)), requires_grad=True)
    probe = rng.normal(size=(2, 6, 4, 6))
    res = check_gradients(lambda: (transform_forward(x, p) * probe).sum(),
                          [x, p.joint_weight, p.joint_bias, p.coord_weight], n_samples=80, rng=rng)
    assert res.ok, res.failures
