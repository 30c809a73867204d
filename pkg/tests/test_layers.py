import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aadnet.exceptions import DegenerateBatchError, LabelError, ParameterError, ShapeError
from aadnet.nn import layers as L
from conftest import finite_difference, rel_error


def test_temporal_identity_kernel(rng):
    x = rng.standard_normal((1, 1, 1, 5))
    y = L.conv_temporal_forward(x, np.ones((1, 1, 1, 1)))
    np.testing.assert_array_equal(y, x)


def test_temporal_ramp_box_filter():
    x = np.arange(1.0, 6.0).reshape(1, 1, 1, 5)
    y = L.conv_temporal_forward(x, np.full((1, 1, 1, 3), 1.0 / 3.0))
    # direct summation with zero padding: (0+1+2)/3, (1+2+3)/3, ...
    expected = np.array([(0 + 1 + 2) / 3, (1 + 2 + 3) / 3, (2 + 3 + 4) / 3, (3 + 4 + 5) / 3, (4 + 5 + 0) / 3])
    np.testing.assert_allclose(y[0, 0, 0], expected, atol=1e-15)


def _direct_temporal(x, w):
    b, k_in, c, t = x.shape
    k_out, _, _, length = w.shape
    left, _ = L.same_pad(length)
    y = np.zeros((b, k_out, c, t))
    for o in range(k_out):
        for i in range(k_in):
            for tt in range(t):
                for l in range(length):
                    s = tt + l - left
                    if 0 <= s < t:
                        y[:, o, :, tt] += w[o, i, 0, l] * x[:, i, :, s]
    return y


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 2), st.integers(1, 3), st.integers(4, 12), st.integers(1, 6),
       st.integers(0, 10_000))
def test_temporal_matches_direct_loops(b, k, c, t, length, seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((b, k, c, t))
    w = r.standard_normal((2, k, 1, length))
    np.testing.assert_allclose(L.conv_temporal_forward(x, w), _direct_temporal(x, w), atol=1e-12)


def test_temporal_kernel_gradient(rng):
    x = rng.standard_normal((2, 1, 3, 20))
    w = rng.standard_normal((2, 1, 1, 5))
    _, dw = L.conv_temporal_backward(np.ones((2, 2, 3, 20)), x, w)
    num = finite_difference(lambda: L.conv_temporal_forward(x, w).sum(), w)
    assert rel_error(dw, num) <= 1e-6


def test_spatial_selector_and_average():
    x = np.stack([np.arange(4.0), 10 + np.arange(4.0)])[None, None]
    y = L.conv_depthwise_spatial_forward(x, np.array([1.0, 0.0]).reshape(1, 1, 2, 1))
    np.testing.assert_array_equal(y[0, 0, 0], x[0, 0, 0])
    x = np.array([[2.0, 2, 2], [4, 4, 4]])[None, None]
    y = L.conv_depthwise_spatial_forward(x, np.array([0.5, 0.5]).reshape(1, 1, 2, 1))
    np.testing.assert_array_equal(y[0, 0, 0], [3.0, 3.0, 3.0])


def test_spatial_weight_count():
    # K_in = 32 maps, depth multiplier 2, 32 channels
    assert np.zeros((32 * 2, 1, 32, 1)).size == 2048


def test_separable_identity_and_sum(rng):
    x = rng.standard_normal((2, 3, 1, 7))
    _, y = L.conv_separable_time_forward(x, np.ones((3, 1, 1, 1)), np.eye(3).reshape(3, 3, 1, 1))
    np.testing.assert_allclose(y, x, atol=1e-15)
    x = np.array([[1.0, 1.0], [3.0, 3.0]]).reshape(1, 2, 1, 2)
    _, y = L.conv_separable_time_forward(x, np.ones((2, 1, 1, 1)), np.ones((1, 2, 1, 1)))
    np.testing.assert_array_equal(y[0, 0, 0], [4.0, 4.0])


def test_separable_gradients(rng):
    x = rng.standard_normal((2, 3, 1, 12))
    dw = rng.standard_normal((3, 1, 1, 4))
    pw = rng.standard_normal((5, 3, 1, 1))
    proj = rng.standard_normal((2, 5, 1, 12))
    mid, _ = L.conv_separable_time_forward(x, dw, pw)
    gx, gd, gp = L.conv_separable_time_backward(proj, x, mid, dw, pw)

    def f():
        return float(np.sum(L.conv_separable_time_forward(x, dw, pw)[1] * proj))

    for a, arr in ((gx, x), (gd, dw), (gp, pw)):
        assert rel_error(a, finite_difference(f, arr)) <= 1e-6


def test_batchnorm_standardizes(rng):
    x = 5.0 + 2.0 * rng.standard_normal((4, 3, 2, 50))
    st_ = L.BnState.create(3)
    y, _ = L.batchnorm_forward(x, st_, L.TRAIN, update_running=False)
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
    # biased variance, up to the eps in the denominator
    var = y.var(axis=(0, 2, 3))
    xv = x.var(axis=(0, 2, 3))
    np.testing.assert_allclose(var, xv / (xv + 1e-5), atol=1e-10)


def test_batchnorm_affine_and_infer(rng):
    x = rng.standard_normal((4, 2, 1, 30))
    x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
    st_ = L.BnState.create(2, eps=1e-300)
    st_.gamma[:], st_.beta[:] = 2.0, 3.0
    y, _ = L.batchnorm_forward(x, st_, L.TRAIN, update_running=False)
    np.testing.assert_allclose(y, 2 * x + 3, atol=1e-12)
    st2 = L.BnState.create(2)
    y, _ = L.batchnorm_forward(x, st2, L.INFER)
    np.testing.assert_allclose(y, x / np.sqrt(1 + 1e-5), atol=1e-15)


def test_batchnorm_running_update(rng):
    x = 3.0 + rng.standard_normal((5, 1, 2, 40))
    st_ = L.BnState.create(1)
    L.batchnorm_forward(x, st_, L.TRAIN)
    np.testing.assert_allclose(st_.running_mean, 0.1 * x.mean(), rtol=1e-12)
    np.testing.assert_allclose(st_.running_var, 0.9 + 0.1 * x.var(), rtol=1e-12)


def test_batchnorm_degenerate_batch():
    with pytest.raises(DegenerateBatchError):
        L.batchnorm_forward(np.ones((1, 1, 1, 1)), L.BnState.create(1), L.TRAIN)


def test_elu_values():
    y = L.elu_forward(np.array([0.0, 3.0, -1.0]))
    np.testing.assert_allclose(y, [0.0, 3.0, np.exp(-1.0) - 1.0], atol=1e-15)
    assert abs(y[2] - (-0.63212)) < 1e-5


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=30))
def test_elu_gradient_property(values):
    x = np.array(values)
    x = x[np.abs(x) > 1e-3]  # keep away from the kink
    if x.size == 0:
        return
    h = 1e-6
    num = (L.elu_forward(x + h) - L.elu_forward(x - h)) / (2 * h)
    ana = L.elu_backward(np.ones_like(x), x, L.elu_forward(x))
    np.testing.assert_allclose(ana, num, rtol=1e-5, atol=1e-8)


def test_avgpool_values():
    np.testing.assert_array_equal(L.avgpool_time_forward(np.full((1, 1, 1, 9), 4.0), 3), np.full((1, 1, 1, 3), 4.0))
    np.testing.assert_array_equal(L.avgpool_time_forward(np.array([1.0, 2, 3, 4]).reshape(1, 1, 1, 4), 4), [[[[2.5]]]])
    y = L.avgpool_time_forward(np.zeros((1, 1, 1, 250)), 4)
    assert y.shape[-1] == 62
    assert L.avgpool_time_forward(y, 8).shape[-1] == 7


def test_avgpool_gradient_is_adjoint(rng):
    x = rng.standard_normal((2, 2, 1, 11))
    dy = rng.standard_normal((2, 2, 1, 2))
    lhs = np.sum(L.avgpool_time_forward(x, 4) * dy)
    rhs = np.sum(x * L.avgpool_time_backward(dy, 11, 4))
    assert abs(lhs - rhs) < 1e-12


def test_dropout_contracts(rng):
    x = rng.standard_normal((3, 4))
    assert L.dropout_forward(x, 0.0, L.TRAIN, rng)[0] is x
    assert L.dropout_forward(x, 0.25, L.INFER)[0] is x
    y, _ = L.dropout_forward(np.ones(10**6), 0.25, L.TRAIN, rng)
    assert 0.99 <= y.mean() <= 1.01
    with pytest.raises(ParameterError):
        L.dropout_forward(x, 1.0, L.TRAIN, rng)


def test_linear_values_and_gradient(rng):
    x = rng.standard_normal((3, 2))
    np.testing.assert_array_equal(L.linear_forward(x, np.eye(2), np.zeros(2)), x)
    y = L.linear_forward(np.array([[2.0, 3.0]]), np.array([[1.0, 1.0]]), np.array([1.0]))
    np.testing.assert_array_equal(y, [[6.0]])
    w, b = rng.standard_normal((4, 2)), rng.standard_normal(4)
    proj = rng.standard_normal((3, 4))
    dx, dw, db = L.linear_backward(proj, x, w)

    def f():
        return float(np.sum(L.linear_forward(x, w, b) * proj))

    for a, arr in ((dx, x), (dw, w), (db, b)):
        assert rel_error(a, finite_difference(f, arr)) <= 1e-7
    with pytest.raises(ShapeError):
        L.linear_forward(np.zeros((1, 3)), w, b)


def test_softmax_xent_values(rng):
    loss, probs, _ = L.softmax_xent(np.zeros((1, 2)), np.array([0]))
    np.testing.assert_allclose(probs, [[0.5, 0.5]])
    assert abs(loss - np.log(2)) < 1e-12
    loss, _, d = L.softmax_xent(np.array([[1000.0, -1000.0]]), np.array([0]))
    assert loss < 1e-12 and np.all(np.isfinite(d))
    logits = rng.standard_normal((5, 2))
    labels = np.array([0, 1, 1, 0, 1])
    _, _, d = L.softmax_xent(logits, labels)
    num = finite_difference(lambda: L.softmax_xent(logits, labels)[0], logits)
    assert rel_error(d, num) <= 1e-6
    with pytest.raises(LabelError):
        L.softmax_xent(logits, np.array([0, 1, 2, 0, 1]))


def test_mode_and_rank_validation(rng):
    with pytest.raises(ParameterError):
        L.batchnorm_forward(np.zeros((2, 1, 1, 4)), L.BnState.create(1), "eval")
    with pytest.raises(ShapeError):
        L.conv_temporal_forward(np.zeros((2, 4)), np.ones((1, 1, 1, 1)))
