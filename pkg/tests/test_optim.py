import numpy as np
import pytest

from aadnet.exceptions import NonFiniteError
from aadnet.nn import AdamState, adam_step


def _step(w, g, **kw):
    params, grads = {"w": np.array([w])}, {"w": np.array([g])}
    adam_step(params, grads, AdamState.zeros_like(params), **kw)
    return params["w"][0]


def test_zero_gradient_no_decay_is_noop():
    assert _step(1.0, 0.0, lr=1e-3) == 1.0


def test_first_step_by_hand():
    # m_hat = g, v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps)
    expected = 1.0 - 0.001 * 1.0 / (1.0 + 1e-8)
    assert abs(_step(1.0, 1.0, lr=0.001) - expected) < 1e-15
    assert abs(expected - 0.999) < 1e-10


def test_pure_decay_term():
    assert abs(_step(1.0, 0.0, lr=0.001, weight_decay=0.01) - 0.99999) < 1e-15


def test_no_decay_keys_skip_decay():
    params = {"w": np.ones(2), "bn1.gamma": np.ones(2)}
    grads = {k: np.zeros(2) for k in params}
    adam_step(params, grads, AdamState.zeros_like(params), lr=0.1, weight_decay=0.5, no_decay={"bn1.gamma"})
    np.testing.assert_array_equal(params["bn1.gamma"], 1.0)
    np.testing.assert_allclose(params["w"], 0.95)


def test_two_steps_match_recurrence():
    params = {"w": np.array([0.5])}
    state = AdamState.zeros_like(params)
    m = v = 0.0
    w = 0.5
    for t, g in enumerate((0.3, -0.7), start=1):
        adam_step(params, {"w": np.array([g])}, state, lr=0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert abs(params["w"][0] - w) < 1e-15


def test_non_finite_gradient_rejected():
    params = {"w": np.ones(3)}
    with pytest.raises(NonFiniteError):
        adam_step(params, {"w": np.array([0.0, np.nan, 0.0])}, AdamState.zeros_like(params))
    np.testing.assert_array_equal(params["w"], 1.0)
