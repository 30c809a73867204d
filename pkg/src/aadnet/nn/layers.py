"""Forward maps and hand-derived gradients for the layers AADNet is built from.

Every tensor is a float64 array laid out as ``(batch, maps, channels, time)``.
Each ``*_forward`` has a matching ``*_backward`` that takes the upstream
gradient together with whatever the forward pass needs to be replayed and
returns gradients with the same shapes as the forward inputs.

All convolutions use the cross-correlation convention (no kernel flip) and
stride 1. Temporal convolutions are zero padded to keep the time length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import DegenerateBatchError, LabelError, ParameterError, ShapeError

TRAIN = "train"
INFER = "infer"
_MODES = (TRAIN, INFER)


def _check_mode(mode):
    if mode not in _MODES:
        raise ParameterError(f"mode must be one of {_MODES}, got {mode!r}")


def _check4(x, name="x"):
    if x.ndim != 4:
        raise ShapeError(f"{name} must be rank 4 (B, K, C, T), got shape {x.shape}")


def same_pad(length):
    """Left/right zero padding that keeps the time length for a kernel of ``length``."""
    left = (length - 1) // 2
    return left, length - 1 - left


def _time_windows(x, length, pad):
    """Zero-pad the last axis by ``pad`` and view it as sliding windows of ``length``."""
    widths = [(0, 0)] * (x.ndim - 1) + [pad]
    return sliding_window_view(np.pad(x, widths), length, axis=-1)


# --------------------------------------------------------------------------
# temporal convolution: (B, K_in, C, T) * (K_out, K_in, 1, L) -> (B, K_out, C, T)


def _im2col(x, length):
    """Rows of ``length`` padded samples, shape ``(B*C*T, K_in*L)``."""
    b, k, c, t = x.shape
    win = _time_windows(x, length, same_pad(length))  # (B, K, C, T, L)
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4)).reshape(b * c * t, k * length)


def conv_temporal_forward(x, w, return_cols=False):
    """Same-padded temporal convolution.

    With ``return_cols`` the unfolded input is returned as well so the
    backward pass can reuse it.
    """
    _check4(x)
    _check4(w, "kernels")
    if w.shape[1] != x.shape[1] or w.shape[2] != 1:
        raise ShapeError(
            f"kernels {w.shape} do not match input maps {x.shape[1]} "
            "(expected (K_out, K_in, 1, L))"
        )
    b, _, c, t = x.shape
    k_out, length = w.shape[0], w.shape[3]
    cols = _im2col(x, length)
    y = (cols @ w.reshape(k_out, -1).T).reshape(b, c, t, k_out).transpose(0, 3, 1, 2)
    return (y, cols) if return_cols else y


def conv_temporal_backward(dy, x, w, need_dx=True, cols=None):
    """Return ``(dx, dw)``; ``dx`` is ``None`` when ``need_dx`` is false."""
    b, k_in, c, t = x.shape
    k_out, length = w.shape[0], w.shape[3]
    if cols is None:
        cols = _im2col(x, length)
    dy_rows = dy.transpose(0, 2, 3, 1).reshape(b * c * t, k_out)
    dw = (dy_rows.T @ cols).reshape(k_out, k_in, 1, length)
    dx = None
    if need_dx:
        left, right = same_pad(length)
        dwin = _time_windows(dy, length, (right, left))  # (B, Kout, C, T, L)
        wflip = w[:, :, 0, ::-1]
        dx = np.tensordot(dwin, wflip, axes=([1, 4], [0, 2]))  # (B, C, T, Kin)
        dx = np.ascontiguousarray(dx.transpose(0, 3, 1, 2))
    return dx, dw


# --------------------------------------------------------------------------
# depthwise spatial convolution: kernels (K_in*D, 1, C, 1) collapse C -> 1


def conv_depthwise_spatial_forward(x, w):
    _check4(x)
    _check4(w, "kernels")
    b, k, c, t = x.shape
    if w.shape[2] != c or w.shape[1] != 1 or w.shape[3] != 1:
        raise ShapeError(f"kernel channel extent {w.shape} does not span C={c}")
    if w.shape[0] % k:
        raise ShapeError(f"{w.shape[0]} kernels is not a multiple of {k} input maps")
    d = w.shape[0] // k
    wr = w.reshape(k, d, c)
    y = np.einsum("bkct,kdc->bkdt", x, wr, optimize=True)
    return y.reshape(b, k * d, 1, t)


def conv_depthwise_spatial_backward(dy, x, w):
    b, k, c, t = x.shape
    d = w.shape[0] // k
    wr = w.reshape(k, d, c)
    dyr = dy.reshape(b, k, d, t)
    dw = np.einsum("bkdt,bkct->kdc", dyr, x, optimize=True).reshape(w.shape)
    dx = np.einsum("bkdt,kdc->bkct", dyr, wr, optimize=True)
    return dx, dw


# --------------------------------------------------------------------------
# depthwise temporal convolution: one (1, L) kernel per map, same padding


def conv_depthwise_time_forward(x, w):
    _check4(x)
    _check4(w, "kernels")
    if w.shape[0] != x.shape[1] or w.shape[1] != 1 or w.shape[2] != 1:
        raise ShapeError(f"kernels {w.shape} do not match {x.shape[1]} input maps")
    length = w.shape[3]
    win = _time_windows(x, length, same_pad(length))  # (B, K, C, T, L)
    return np.einsum("bkctl,kl->bkct", win, w[:, 0, 0, :], optimize=True)


def conv_depthwise_time_backward(dy, x, w):
    length = w.shape[3]
    left, right = same_pad(length)
    win = _time_windows(x, length, (left, right))
    dw = np.einsum("bkctl,bkct->kl", win, dy, optimize=True).reshape(w.shape)
    dwin = _time_windows(dy, length, (right, left))
    dx = np.einsum("bkctl,kl->bkct", dwin, w[:, 0, 0, ::-1], optimize=True)
    return dx, dw


# --------------------------------------------------------------------------
# pointwise (1x1) convolution: kernels (K_out, K_in, 1, 1) mix maps only


def conv_pointwise_forward(x, w):
    _check4(x)
    _check4(w, "kernels")
    if w.shape[1] != x.shape[1] or w.shape[2:] != (1, 1):
        raise ShapeError(f"pointwise kernels {w.shape} do not match {x.shape[1]} maps")
    return np.einsum("bkct,ok->boct", x, w[:, :, 0, 0], optimize=True)


def conv_pointwise_backward(dy, x, w):
    dw = np.einsum("boct,bkct->ok", dy, x, optimize=True)[:, :, None, None]
    dx = np.einsum("boct,ok->bkct", dy, w[:, :, 0, 0], optimize=True)
    return dx, dw


def conv_separable_time_forward(x, depth_w, point_w):
    """Depthwise temporal convolution followed by a pointwise convolution.

    Returns both the depthwise and the pointwise outputs.
    """
    if x.ndim == 4 and x.shape[2] != 1:
        raise ShapeError(f"separable convolution expects a collapsed channel axis, got {x.shape}")
    mid = conv_depthwise_time_forward(x, depth_w)
    return mid, conv_pointwise_forward(mid, point_w)


def conv_separable_time_backward(d_out, x, mid, depth_w, point_w):
    """Return ``(dx, d_depth_w, d_point_w)`` for the composed separable block."""
    d_mid, d_point = conv_pointwise_backward(d_out, mid, point_w)
    dx, d_depth = conv_depthwise_time_backward(d_mid, x, depth_w)
    return dx, d_depth, d_point


# --------------------------------------------------------------------------
# batch normalization over (B, C, T) per map


@dataclass
class BnState:
    """Affine parameters and running statistics of one batch-norm layer."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def create(cls, n_maps, momentum=0.1, eps=1e-5):
        if not 0.0 < momentum < 1.0:
            raise ParameterError(f"momentum must lie in (0, 1), got {momentum}")
        if eps <= 0:
            raise ParameterError(f"eps must be positive, got {eps}")
        return cls(
            gamma=np.ones(n_maps),
            beta=np.zeros(n_maps),
            running_mean=np.zeros(n_maps),
            running_var=np.ones(n_maps),
            momentum=momentum,
            eps=eps,
        )


@dataclass
class BnCache:
    xhat: np.ndarray
    inv_std: np.ndarray
    mode: str
    batch_mean: np.ndarray = field(default=None)
    batch_var: np.ndarray = field(default=None)


def _bcast(v):
    return v[None, :, None, None]


def batchnorm_forward(x, state, mode, update_running=True):
    """Normalize each map of ``x``; in train mode also update ``state`` running stats.

    The variance used for normalization and for the running average is the
    biased (population) variance.
    """
    _check4(x)
    _check_mode(mode)
    if x.shape[1] != state.gamma.shape[0]:
        raise ShapeError(f"batch norm has {state.gamma.shape[0]} maps, input has {x.shape[1]}")
    if mode == TRAIN:
        n = x.shape[0] * x.shape[2] * x.shape[3]
        if n < 2:
            raise DegenerateBatchError(
                f"train-mode batch norm needs at least 2 elements per map, got {n}"
            )
        mean = x.mean(axis=(0, 2, 3))
        xhat = x - _bcast(mean)
        var = np.einsum("bkct,bkct->k", xhat, xhat) / n
        if update_running:
            m = state.momentum
            state.running_mean = (1.0 - m) * state.running_mean + m * mean
            state.running_var = (1.0 - m) * state.running_var + m * var
    else:
        mean, var = state.running_mean, state.running_var
        xhat = x - _bcast(mean)
    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat *= _bcast(inv_std)
    y = xhat * _bcast(state.gamma)
    y += _bcast(state.beta)
    cache = BnCache(xhat=xhat, inv_std=inv_std, mode=mode)
    if mode == TRAIN:
        cache.batch_mean, cache.batch_var = mean, var
    return y, cache


def batchnorm_backward(dy, cache, gamma):
    """Return ``(dx, dgamma, dbeta)``."""
    dgamma = np.einsum("bkct,bkct->k", dy, cache.xhat)
    dbeta = dy.sum(axis=(0, 2, 3))
    scale = _bcast(gamma * cache.inv_std)
    if cache.mode == INFER:
        return dy * scale, dgamma, dbeta
    n = dy.shape[0] * dy.shape[2] * dy.shape[3]
    dx = cache.xhat * _bcast(-dgamma / n)
    dx += dy
    dx -= _bcast(dbeta / n)
    dx *= scale
    return dx, dgamma, dbeta


# --------------------------------------------------------------------------
# pointwise nonlinearities, pooling, dropout


def elu_forward(x, alpha=1.0):
    return np.where(x >= 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def elu_backward(dy, x, y, alpha=1.0):
    return dy * np.where(x >= 0, 1.0, y + alpha)


def avgpool_time_forward(x, width):
    if width < 1:
        raise ParameterError(f"pool width must be >= 1, got {width}")
    t_out = x.shape[-1] // width
    if t_out == 0:
        raise ShapeError(f"time length {x.shape[-1]} is shorter than pool width {width}")
    trimmed = x[..., : t_out * width]
    return trimmed.reshape(*x.shape[:-1], t_out, width).mean(axis=-1)


def avgpool_time_backward(dy, input_len, width):
    dx = np.zeros(dy.shape[:-1] + (input_len,))
    t_out = dy.shape[-1]
    dx[..., : t_out * width] = np.repeat(dy / width, width, axis=-1)
    return dx


def dropout_forward(x, p, mode, rng=None):
    """Inverted dropout. Returns ``(y, mask)``; ``mask`` is ``None`` when nothing is dropped."""
    _check_mode(mode)
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must lie in [0, 1), got {p}")
    if mode == INFER or p == 0.0:
        return x, None
    if rng is None:
        raise ParameterError("train-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


# --------------------------------------------------------------------------
# dense layers and loss


def linear_forward(x, w, b):
    if x.ndim != 2 or x.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"linear: input {x.shape}, weights {w.shape}, bias {b.shape}")
    return x @ w.T + b


def linear_backward(dy, x, w):
    """Return ``(dx, dw, db)``."""
    return dy @ w, dy.T @ x, dy.sum(axis=0)


def softmax_xent(logits, labels):
    """Mean two-class cross-entropy.

    Returns ``(loss, probs, d_logits)`` where ``d_logits`` is the gradient of
    the mean loss.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ShapeError(f"expected (B, 2) logits, got {logits.shape}")
    if labels.shape != (logits.shape[0],):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {logits.shape[0]}")
    if not np.all((labels == 0) | (labels == 1)):
        raise LabelError("labels must be 0 or 1")
    labels = labels.astype(np.intp)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    probs = np.exp(log_probs)
    n = logits.shape[0]
    loss = -log_probs[np.arange(n), labels].mean()
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0
    return float(loss), probs, (probs - onehot) / n
