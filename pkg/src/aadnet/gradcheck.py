"""Central finite-difference checks of every layer and of the whole network.

Layers are checked on the scalar objective ``sum(forward(...) * R)`` with a
fixed random projection ``R``, so the upstream gradient is ``R``. The
per-coordinate relative error is ``|a - n| / max(|a|, |n|, floor)`` where
``a`` is the analytic and ``n`` the numerical derivative. The floor is
``max(FLOOR, SCALE_FLOOR * max|a|)`` over the array being checked: a step
of 1e-5 in 64-bit arithmetic leaves difference-quotient noise near 1e-10,
so coordinates far below the array's gradient scale cannot be resolved to
the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import network
from .model.config import ModelConfig
from .nn import fused as F
from .nn import layers as L
from .nn.layers import TRAIN

STEP = 1e-5
FLOOR = 1e-6
SCALE_FLOOR = 1e-3
LAYER_TOL = 1e-5
MODEL_TOL = 1e-4
MODEL_FRACTION = 0.99


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    worst: str
    passed: bool
    fraction_ok: float = 1.0
    n_checked: int = 0


def relative_error(analytic, numeric, floor=FLOOR):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def array_floor(analytic):
    return max(FLOOR, SCALE_FLOOR * float(np.max(np.abs(analytic), initial=0.0)))


def numerical_gradient(f, x, h=STEP, indices=None):
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    flat = x.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = {}
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
    if indices is None:
        return np.array([out[i] for i in range(flat.size)]).reshape(x.shape)
    return out


def _where(key, flat_index, shape):
    idx = ",".join(str(int(v)) for v in np.unravel_index(flat_index, shape))
    return f"{key}[{idx}]"


def _check_arrays(name, f, arrays, analytic, tol=LAYER_TOL):
    worst_err, worst_at, n = 0.0, "", 0
    for key, arr in arrays.items():
        num = numerical_gradient(f, arr)
        err = relative_error(analytic[key], num, array_floor(analytic[key]))
        n += err.size
        i = int(np.argmax(err))
        if err.flat[i] > worst_err or not worst_at:
            worst_err = float(err.flat[i])
            worst_at = _where(key, i, err.shape)
    return CheckResult(name, worst_err, worst_at, worst_err <= tol, n_checked=n)


def _projected(forward, proj):
    return lambda: float(np.sum(forward() * proj))


def check_conv_temporal(rng):
    x = rng.standard_normal((2, 2, 3, 20))
    w = rng.standard_normal((3, 2, 1, 5))
    r = rng.standard_normal((2, 3, 3, 20))
    dx, dw = L.conv_temporal_backward(r, x, w)
    f = _projected(lambda: L.conv_temporal_forward(x, w), r)
    return _check_arrays("conv_temporal", f, {"x": x, "w": w}, {"x": dx, "w": dw})


def check_conv_depthwise_spatial(rng):
    x = rng.standard_normal((2, 3, 4, 7))
    w = rng.standard_normal((6, 1, 4, 1))
    r = rng.standard_normal((2, 6, 1, 7))
    dx, dw = L.conv_depthwise_spatial_backward(r, x, w)
    f = _projected(lambda: L.conv_depthwise_spatial_forward(x, w), r)
    return _check_arrays("conv_depthwise_spatial", f, {"x": x, "w": w}, {"x": dx, "w": dw})


def check_conv_separable_time(rng):
    x = rng.standard_normal((2, 3, 1, 12))
    wd = rng.standard_normal((3, 1, 1, 4))
    wp = rng.standard_normal((5, 3, 1, 1))
    r = rng.standard_normal((2, 5, 1, 12))
    mid, _ = L.conv_separable_time_forward(x, wd, wp)
    dx, dwd, dwp = L.conv_separable_time_backward(r, x, mid, wd, wp)
    f = _projected(lambda: L.conv_separable_time_forward(x, wd, wp)[1], r)
    return _check_arrays(
        "conv_separable_time", f, {"x": x, "w_depth": wd, "w_point": wp},
        {"x": dx, "w_depth": dwd, "w_point": dwp},
    )


def check_batchnorm(rng):
    x = rng.standard_normal((3, 4, 2, 5)) * 2.0 + 1.0
    state = L.BnState.create(4)
    state.gamma = rng.standard_normal(4)
    state.beta = rng.standard_normal(4)
    r = rng.standard_normal(x.shape)
    _, cache = L.batchnorm_forward(x, state, TRAIN, update_running=False)
    dx, dg, db = L.batchnorm_backward(r, cache, state.gamma)

    def run():
        return L.batchnorm_forward(x, state, TRAIN, update_running=False)[0]

    f = _projected(run, r)
    return _check_arrays(
        "batchnorm", f, {"x": x, "gamma": state.gamma, "beta": state.beta},
        {"x": dx, "gamma": dg, "beta": db},
    )


def check_elu(rng):
    x = rng.standard_normal((2, 3, 2, 6))
    # keep coordinates away from the kink so the difference quotient is smooth
    x[np.abs(x) < 1e-3] += 0.01
    r = rng.standard_normal(x.shape)
    y = L.elu_forward(x)
    dx = L.elu_backward(r, x, y)
    f = _projected(lambda: L.elu_forward(x), r)
    return _check_arrays("elu", f, {"x": x}, {"x": dx})


def check_avgpool(rng):
    x = rng.standard_normal((2, 2, 1, 11))
    r = rng.standard_normal((2, 2, 1, 2))
    dx = L.avgpool_time_backward(r, 11, 4)
    f = _projected(lambda: L.avgpool_time_forward(x, 4), r)
    return _check_arrays("avgpool_time", f, {"x": x}, {"x": dx})


def check_dropout(rng):
    x = rng.standard_normal((2, 3, 1, 8))
    r = rng.standard_normal(x.shape)
    seed = int(rng.integers(2**31))
    _, mask = L.dropout_forward(x, 0.25, TRAIN, np.random.default_rng(seed))
    dx = L.dropout_backward(r, mask)

    def run():
        return L.dropout_forward(x, 0.25, TRAIN, np.random.default_rng(seed))[0]

    return _check_arrays("dropout", _projected(run, r), {"x": x}, {"x": dx})


def check_linear(rng):
    x = rng.standard_normal((4, 6))
    w = rng.standard_normal((3, 6))
    b = rng.standard_normal(3)
    r = rng.standard_normal((4, 3))
    dx, dw, db = L.linear_backward(r, x, w)
    f = _projected(lambda: L.linear_forward(x, w, b), r)
    return _check_arrays("linear", f, {"x": x, "w": w, "b": b}, {"x": dx, "w": dw, "b": db})


def check_softmax_xent(rng):
    logits = rng.standard_normal((5, 2)) * 2.0
    labels = rng.integers(0, 2, size=5)
    _, _, d = L.softmax_xent(logits, labels)
    f = lambda: L.softmax_xent(logits, labels)[0]  # noqa: E731
    return _check_arrays("softmax_xent", f, {"logits": logits}, {"logits": d})


def check_temporal_spatial(rng):
    """Fused temporal conv + train-mode BN1 + spatial conv."""
    x = rng.standard_normal((2, 1, 3, 16)) + 0.5
    wt = rng.standard_normal((2, 1, 1, 5))
    ws = rng.standard_normal((4, 1, 3, 1))
    state = L.BnState.create(2)
    state.gamma = rng.standard_normal(2)
    state.beta = rng.standard_normal(2)
    r = rng.standard_normal((2, 4, 1, 16))
    _, cache = F.temporal_spatial_forward(x, wt, ws, state, TRAIN, update_running=False)
    g = F.temporal_spatial_backward(r, cache, need_dx=True)

    def run():
        return F.temporal_spatial_forward(x, wt, ws, state, TRAIN, update_running=False)[0]

    return _check_arrays(
        "temporal_spatial_fused", _projected(run, r),
        {"x": x, "w_temporal": wt, "w_spatial": ws, "gamma": state.gamma, "beta": state.beta},
        {"x": g["x"], "w_temporal": g["w_temporal"], "w_spatial": g["w_spatial"],
         "gamma": g["gamma"], "beta": g["beta"]},
    )


LAYER_CHECKS = (
    check_conv_temporal,
    check_conv_depthwise_spatial,
    check_conv_separable_time,
    check_batchnorm,
    check_elu,
    check_avgpool,
    check_dropout,
    check_linear,
    check_softmax_xent,
    check_temporal_spatial,
)


def toy_config(**overrides):
    """The default architecture on a 4-channel, 40-sample input (whole-model checks)."""
    kw = dict(n_channels=4, window_samples=40)
    kw.update(overrides)
    return ModelConfig(**kw)


def check_model(rng, config=None, n_samples=400, batch=2):
    """Full-network check on a random subset of coordinates of every array.

    Passes when at least 99% of the sampled coordinates are within the
    whole-model tolerance.
    """
    config = config or toy_config()
    params = network.init_model(config, rng)
    for k in params.weights:
        if k.endswith(".gamma"):
            params.weights[k] = 1.0 + 0.1 * rng.standard_normal(params.weights[k].shape)
        elif k.endswith(".beta") or k.startswith("b_"):
            params.weights[k] = 0.1 * rng.standard_normal(params.weights[k].shape)
    x = rng.standard_normal((batch, 1, config.n_channels, config.window_samples))
    y = rng.integers(0, 2, size=batch)
    seed = int(rng.integers(2**31))

    def loss():
        logits, _ = network.forward(params, x, TRAIN, np.random.default_rng(seed),
                                    update_running=False)
        return L.softmax_xent(logits, y)[0]

    logits, cache = network.forward(params, x, TRAIN, np.random.default_rng(seed),
                                    update_running=False)
    _, _, d_logits = L.softmax_xent(logits, y)
    grads = network.backward(params, cache, d_logits, need_dx=True)

    arrays = dict(params.weights, x=x)
    sizes = np.array([arrays[k].size for k in arrays])
    per_array = np.maximum(1, (n_samples * sizes / sizes.sum()).astype(int))
    errs, worst_err, worst_at = [], 0.0, ""
    for (key, arr), n in zip(arrays.items(), per_array):
        idx = rng.choice(arr.size, size=min(n, arr.size), replace=False)
        num = numerical_gradient(loss, arr, indices=idx)
        floor = array_floor(grads[key])
        for i in idx:
            e = float(relative_error(grads[key].flat[i], num[i], floor))
            errs.append(e)
            if e > worst_err:
                worst_err, worst_at = e, _where(key, i, arr.shape)
    errs = np.array(errs)
    frac = float(np.mean(errs <= MODEL_TOL))
    return CheckResult("aadnet_full", worst_err, worst_at, frac >= MODEL_FRACTION,
                       fraction_ok=frac, n_checked=errs.size)


def run_all(seed=0):
    rng = np.random.default_rng(seed)
    results = [check(rng) for check in LAYER_CHECKS]
    results.append(check_model(rng))
    return results


def format_table(results):
    lines = [f"{'check':<24} {'max_rel_err':>12} {'ok_frac':>8}  {'status':<6} worst"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(
            f"{r.name:<24} {r.max_rel_error:>12.3e} {r.fraction_ok:>8.4f}  {status:<6} {r.worst}"
        )
    return "\n".join(lines)
