"""AADNet forward and backward passes over a flat parameter dictionary.

Blocks, in order:

* temporal learning: temporal convolution, BN1
* spatial learning: depthwise spatial convolution, BN2, ELU, average pool,
  dropout
* hybrid decoding: depthwise temporal convolution, BN3a, ELU, pointwise
  convolution, BN3b, ELU, average pool, dropout
* classifier: two linear layers (hidden width, then 2 logits)

An ablated batch norm is replaced by the identity and its affine parameters
are absent from the parameter set.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ShapeError, StateError
from ..nn import layers as L
from ..nn.fused import temporal_spatial_forward, temporal_spatial_backward
from ..nn.layers import INFER, TRAIN
from .config import ModelConfig


@dataclass
class ModelParams:
    """Trainable arrays plus batch-norm running statistics for one network."""

    config: ModelConfig
    weights: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)

    def copy(self):
        return ModelParams(
            self.config,
            {k: v.copy() for k, v in self.weights.items()},
            {k: v.copy() for k, v in self.buffers.items()},
        )

    def n_trainable(self):
        return int(sum(v.size for v in self.weights.values()))

    @property
    def no_decay(self):
        """Keys excluded from weight decay: batch-norm affine terms and biases."""
        return tuple(k for k in self.weights if k.startswith("bn") or k.startswith("b_"))


def active_norms(config):
    names = []
    if config.bn1:
        names.append("bn1")
    if config.bn2:
        names.append("bn2")
    if config.bn3:
        names.append("bn3a")
    if config.bn3 or not config.bn3_both:
        names.append("bn3b")
    return names


def param_shapes(config):
    """Shapes of every trainable array, in canonical order."""
    k, c = config.temporal_kernels, config.n_channels
    m = config.spatial_maps
    norms = set(active_norms(config))
    shapes = {"w_temporal": (k, 1, 1, config.temporal_len)}
    if "bn1" in norms:
        shapes["bn1.gamma"] = shapes["bn1.beta"] = (k,)
    shapes["w_spatial"] = (m, 1, c, 1)
    if "bn2" in norms:
        shapes["bn2.gamma"] = shapes["bn2.beta"] = (m,)
    shapes["w_sepdepth"] = (m, 1, 1, config.sep_len)
    if "bn3a" in norms:
        shapes["bn3a.gamma"] = shapes["bn3a.beta"] = (m,)
    shapes["w_point"] = (m, m, 1, 1)
    if "bn3b" in norms:
        shapes["bn3b.gamma"] = shapes["bn3b.beta"] = (m,)
    shapes["w_fc1"] = (config.hidden, config.flatten_width)
    shapes["b_fc1"] = (config.hidden,)
    shapes["w_fc2"] = (config.n_classes, config.hidden)
    shapes["b_fc2"] = (config.n_classes,)
    return shapes


def count_parameters(config):
    """Closed-form trainable parameter count for ``config``."""
    return int(sum(np.prod(s) for s in param_shapes(config).values()))


def _glorot_limit(shape):
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
    else:
        fan_in, fan_out = shape[1], shape[0]
    return np.sqrt(6.0 / (fan_in + fan_out))


def init_model(config, rng):
    """Glorot-uniform kernels, zero biases, unit/zero batch-norm affine terms."""
    config.validate()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    weights = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".gamma"):
            weights[name] = np.ones(shape)
        elif name.endswith(".beta") or name.startswith("b_"):
            weights[name] = np.zeros(shape)
        else:
            a = _glorot_limit(shape)
            weights[name] = rng.uniform(-a, a, size=shape)
    buffers = {}
    for bn in active_norms(config):
        n = weights[f"{bn}.gamma"].shape[0]
        buffers[f"{bn}.running_mean"] = np.zeros(n)
        buffers[f"{bn}.running_var"] = np.ones(n)
    return ModelParams(config, weights, buffers)


def _bn_state(params, name):
    cfg = params.config
    return L.BnState(
        gamma=params.weights[f"{name}.gamma"],
        beta=params.weights[f"{name}.beta"],
        running_mean=params.buffers[f"{name}.running_mean"],
        running_var=params.buffers[f"{name}.running_var"],
        momentum=cfg.bn_momentum,
        eps=cfg.bn_eps,
    )


def _norm(params, name, x, mode, cache, update_running):
    if f"{name}.gamma" not in params.weights:
        cache[name] = None
        return x
    state = _bn_state(params, name)
    y, cache[name] = L.batchnorm_forward(x, state, mode, update_running=update_running)
    if mode == TRAIN and update_running:
        params.buffers[f"{name}.running_mean"] = state.running_mean
        params.buffers[f"{name}.running_var"] = state.running_var
    return y


def _check_input(params, x):
    cfg = params.config
    expected = (cfg.n_channels, cfg.window_samples)
    if x.ndim != 4 or x.shape[1] != 1 or x.shape[2:] != expected:
        raise ShapeError(
            f"expected input (B, 1, {expected[0]}, {expected[1]}), got {tuple(x.shape)}"
        )


def forward(params, x, mode=INFER, rng=None, update_running=True, stop_at=None):
    """Run the network on ``x`` of shape ``(B, 1, C, T)``.

    Returns ``(logits, cache)``. In train mode batch statistics are used,
    running statistics are updated (unless ``update_running`` is false) and
    dropout draws from ``rng``. ``stop_at="hidden"`` returns the hidden-layer
    activations instead of logits.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_input(params, x)
    cfg = params.config
    w = params.weights
    c = {"x": x, "mode": mode}

    # temporal conv, BN1 and the spatial conv run fused (see nn.fused)
    bn1 = _bn_state(params, "bn1") if "bn1.gamma" in w else None
    c["z2"], c["block1"] = temporal_spatial_forward(
        x, w["w_temporal"], w["w_spatial"], bn1, mode, update_running
    )
    if bn1 is not None and mode == TRAIN and update_running:
        params.buffers["bn1.running_mean"] = bn1.running_mean
        params.buffers["bn1.running_var"] = bn1.running_var
    c["bn1"] = bn1
    c["F_f1"] = _norm(params, "bn2", c["z2"], mode, c, update_running)
    c["a2"] = L.elu_forward(c["F_f1"])
    c["F_f2"] = L.avgpool_time_forward(c["a2"], cfg.pool1)
    c["F_fused"], c["mask1"] = L.dropout_forward(c["F_f2"], cfg.dropout, mode, rng)

    c["z3"] = L.conv_depthwise_time_forward(c["F_fused"], w["w_sepdepth"])
    c["b3"] = _norm(params, "bn3a", c["z3"], mode, c, update_running)
    c["F_1"] = L.elu_forward(c["b3"])
    c["z4"] = L.conv_pointwise_forward(c["F_1"], w["w_point"])
    c["b4"] = _norm(params, "bn3b", c["z4"], mode, c, update_running)
    c["F_2"] = L.elu_forward(c["b4"])
    c["p2"] = L.avgpool_time_forward(c["F_2"], cfg.pool2)
    c["F_target"], c["mask2"] = L.dropout_forward(c["p2"], cfg.dropout, mode, rng)

    c["flat"] = c["F_target"].reshape(x.shape[0], -1)
    c["hidden"] = L.linear_forward(c["flat"], w["w_fc1"], w["b_fc1"])
    if stop_at == "hidden":
        return c["hidden"], c
    logits = L.linear_forward(c["hidden"], w["w_fc2"], w["b_fc2"])
    c["logits"] = logits
    return logits, c


def _norm_backward(params, name, dy, cache, grads):
    bn_cache = cache.get(name)
    if bn_cache is None:
        return dy
    dx, grads[f"{name}.gamma"], grads[f"{name}.beta"] = L.batchnorm_backward(
        dy, bn_cache, params.weights[f"{name}.gamma"]
    )
    return dx


def backward(params, cache, d_logits, need_dx=False):
    """Gradients of every trainable array given ``d_logits``.

    ``need_dx`` additionally returns the gradient with respect to the input
    under the key ``"x"``.
    """
    if "logits" not in cache:
        raise StateError("cache does not come from a full forward pass")
    for name in active_norms(params.config):
        if cache.get(name) is None or f"{name}.gamma" not in params.weights:
            raise StateError(f"cache and parameters disagree about batch norm {name!r}")
    cfg = params.config
    w = params.weights
    g = {}
    d_logits = np.asarray(d_logits, dtype=np.float64)
    if d_logits.shape != cache["logits"].shape:
        raise StateError(f"d_logits {d_logits.shape} does not match logits {cache['logits'].shape}")

    dh, g["w_fc2"], g["b_fc2"] = L.linear_backward(d_logits, cache["hidden"], w["w_fc2"])
    dflat, g["w_fc1"], g["b_fc1"] = L.linear_backward(dh, cache["flat"], w["w_fc1"])
    d = dflat.reshape(cache["F_target"].shape)

    d = L.dropout_backward(d, cache["mask2"])
    d = L.avgpool_time_backward(d, cache["F_2"].shape[-1], cfg.pool2)
    d = L.elu_backward(d, cache["b4"], cache["F_2"])
    d = _norm_backward(params, "bn3b", d, cache, g)
    d, g["w_point"] = L.conv_pointwise_backward(d, cache["F_1"], w["w_point"])
    d = L.elu_backward(d, cache["b3"], cache["F_1"])
    d = _norm_backward(params, "bn3a", d, cache, g)
    d, g["w_sepdepth"] = L.conv_depthwise_time_backward(d, cache["F_fused"], w["w_sepdepth"])

    d = L.dropout_backward(d, cache["mask1"])
    d = L.avgpool_time_backward(d, cache["a2"].shape[-1], cfg.pool1)
    d = L.elu_backward(d, cache["F_f1"], cache["a2"])
    d = _norm_backward(params, "bn2", d, cache, g)
    block = temporal_spatial_backward(d, cache["block1"], need_dx=need_dx)
    g["w_temporal"], g["w_spatial"] = block["w_temporal"], block["w_spatial"]
    if "gamma" in block:
        g["bn1.gamma"], g["bn1.beta"] = block["gamma"], block["beta"]
    dx = block.get("x")

    missing = set(w) ^ set(g)
    if missing:
        raise StateError(f"gradient set does not match parameters: {sorted(missing)}")
    grads = {k: g[k] for k in w}
    if need_dx:
        grads["x"] = dx
    return grads


def predict_proba(params, x):
    logits, _ = forward(params, x, INFER)
    return softmax(logits)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict(params, x, threshold=None):
    """Class labels; ties and ``p1 >= threshold`` go to the positive class 1."""
    p1 = predict_proba(params, x)[:, 1]
    return labels_from_proba(p1, threshold)


def labels_from_proba(p1, threshold=None):
    theta = 0.5 if threshold is None else threshold
    return (np.asarray(p1) >= theta).astype(np.int64)


def clone(params):
    return copy.deepcopy(params)
