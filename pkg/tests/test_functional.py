import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motion_transfer.autograd import functional as F
from motion_transfer.autograd.gradcheck import check_gradients
from motion_transfer.autograd.tensor import Tensor, reduce_sum, mul
from motion_transfer.errors import ArgumentError, DimensionError


def test_softmax_uniform():
    np.testing.assert_allclose(F.softmax(Tensor([0.0, 0.0, 0.0])).data, [1 / 3] * 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_softmax_is_a_distribution(rows, cols, seed):
    x = Tensor(np.random.default_rng(seed).standard_normal((rows, cols)) * 10)
    for axis in (0, 1):
        y = F.softmax(x, axis=axis).data
        assert (y >= 0).all()
        np.testing.assert_allclose(y.sum(axis=axis), 1.0, atol=1e-6)


def test_softmax_bad_axis():
    with pytest.raises(ArgumentError):
        F.softmax(Tensor(np.ones((2, 2))), axis=2)


def test_nearest_upsample_replicates():
    out = F.nearest_upsample_2x(Tensor([[1.0, 2.0], [3.0, 4.0]])).data
    np.testing.assert_array_equal(out, [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]])


def test_layer_norm_normalises():
    x = Tensor(np.random.default_rng(0).standard_normal((5, 16)) * 3 + 2)
    y = F.layer_norm(x).data
    np.testing.assert_allclose(y.mean(-1), 0, atol=1e-10)
    np.testing.assert_allclose(y.var(-1), 1, atol=1e-3)


def test_layer_norm_rejects_bad_eps_and_axis():
    x = Tensor(np.ones((2, 3)))
    with pytest.raises(ArgumentError):
        F.layer_norm(x, eps=0.0)
    with pytest.raises(ArgumentError):
        F.layer_norm(x, axis=3)


def test_conv2d_needs_4d():
    with pytest.raises(DimensionError):
        F.conv2d(Tensor(np.ones((2, 5, 5))), Tensor(np.ones((1, 2, 3, 3))))


def test_conv2d_matches_direct_loop():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((2, 3, 7, 6))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=2, pad=1).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros_like(out)
    for n in range(2):
        for o in range(4):
            for i in range(out.shape[2]):
                for j in range(out.shape[3]):
                    ref[n, o, i, j] = (xp[n, :, 2 * i:2 * i + 3, 2 * j:2 * j + 3] * w[o]).sum() + b[o]
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_conv2d_gradient_small():
    rng = np.random.default_rng(0)
    x, w = Tensor(rng.standard_normal((1, 2, 5, 5))), Tensor(rng.standard_normal((3, 2, 3, 3)))
    r = Tensor(rng.standard_normal((1, 3, 5, 5)))
    assert check_gradients(lambda a, b: reduce_sum(mul(F.conv2d(a, b, pad=1), r)), [x, w]) < 1e-4


def test_gelu_values():
    y = F.gelu(Tensor([0.0, 1.0, -1.0])).data
    np.testing.assert_allclose(y, [0.0, 0.8413447460685429, -0.15865525393145707], atol=1e-12)


def test_activation_ranges():
    x = Tensor(np.linspace(-30, 30, 101))
    s, t = F.sigmoid(x).data, F.tanh(x).data
    assert (s >= 0).all() and (s <= 1).all() and (t >= -1).all() and (t <= 1).all()
    np.testing.assert_array_equal(F.leaky_relu(Tensor([-1.0, 2.0]), 0.2).data, [-0.2, 2.0])


# -- grid sampling -------------------------------------------------------------

def test_zero_flow_is_identity():
    rng = np.random.default_rng(0)
    f = rng.standard_normal((2, 3, 5, 6))
    out = F.grid_sample_bilinear(Tensor(f), Tensor(np.zeros((2, 2, 5, 6)))).data
    assert np.abs(out - f).max() <= 1e-6


def test_constant_shift_on_ramp():
    ramp = np.tile(np.arange(6.0), (4, 1))[None, None]
    flow = np.zeros((1, 2, 4, 6))
    flow[:, 0] = 1.0
    out = F.grid_sample_bilinear(Tensor(ramp), Tensor(flow)).data[0, 0]
    expected = np.tile(np.minimum(np.arange(6.0) + 1, 5), (4, 1))
    np.testing.assert_allclose(out, expected)


def test_fractional_shift_interpolates():
    f = np.arange(16.0).reshape(1, 1, 4, 4)
    flow = np.zeros((1, 2, 4, 4))
    flow[:, 0], flow[:, 1] = 0.25, 0.5
    out = F.grid_sample_bilinear(Tensor(f), Tensor(flow)).data[0, 0]
    # f(y, x) = 4y + x is linear, so interior samples are exact
    np.testing.assert_allclose(out[:3, :3], f[0, 0, :3, :3] + 0.25 + 4 * 0.5)


def test_grid_sample_shape_mismatch():
    with pytest.raises(DimensionError):
        F.grid_sample_bilinear(Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 2, 4, 5))))


def test_grid_sample_flow_gradient():
    rng = np.random.default_rng(5)
    feat = Tensor(rng.standard_normal((1, 1, 4, 4)))
    flow = Tensor(rng.uniform(0.1, 0.4, size=(1, 2, 4, 4)))
    r = Tensor(rng.standard_normal((1, 1, 4, 4)))
    assert check_gradients(lambda a, b: reduce_sum(mul(F.grid_sample_bilinear(a, b), r)), [feat, flow]) < 1e-4


def test_flow_upsampling_doubles_constant():
    flow = np.zeros((1, 2, 3, 3))
    flow[:, 0], flow[:, 1] = 0.75, -1.25
    up = F.upsample_flow_2x(Tensor(flow)).data
    assert up.shape == (1, 2, 6, 6)
    assert (up[:, 0] == 1.5).all() and (up[:, 1] == -2.5).all()
