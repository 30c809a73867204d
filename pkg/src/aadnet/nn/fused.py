"""Temporal convolution, batch norm and depthwise spatial convolution as one block.

For a single input map the three operations compose to::

    z1[b,k,c,t] = sum_l wt[k,l] xp[b,c,t+l]          (temporal, same padded)
    a1          = gamma_k (z1 - mu_k) / s_k + beta_k  (batch norm per map k)
    z2[b,j,t]   = sum_c ws[j,c] a1[b,k(j),c,t]        (spatial, k(j) = j // D)

Because every step is linear in the data, ``z2`` equals the temporal kernel
applied to the spatially projected input ``y = ws @ xp``, followed by a
per-map affine correction. The batch-norm moments of ``z1`` only need the
lagged first and second moments of ``xp``, so the ``(B, K, C, T)`` tensor is
never formed. The block agrees with the separate layers up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..exceptions import DegenerateBatchError, ShapeError
from . import layers as L
from .layers import INFER, TRAIN


@dataclass
class FusedCache:
    xp: np.ndarray
    y: np.ndarray
    q: np.ndarray
    w_temporal: np.ndarray
    w_spatial: np.ndarray
    depth: int
    t: int
    mode: str
    bn: bool
    gamma: np.ndarray = None
    beta: np.ndarray = None
    mean: np.ndarray = None
    std: np.ndarray = None
    lag_mean: np.ndarray = None
    lag_second: np.ndarray = None


def lag_moments(xp, t, length):
    """First and second moments of the ``length`` lagged copies of ``xp``.

    Returns ``m[l] = mean xp[..., t'+l]`` and
    ``R[l, l'] = mean xp[..., t'+l] * xp[..., t'+l']`` over batch, channel and
    ``t' < t``.
    """
    b, c, tp = xp.shape
    n = b * c * t
    flat = xp.reshape(b * c, tp)
    csum = np.concatenate([[0.0], np.cumsum(flat.sum(axis=0))])
    m = (csum[t : t + length] - csum[:length]) / n
    g = flat.T @ flat
    # running sums along each diagonal: d[i, j] = sum_k g[i-k, j-k]
    d = g.copy()
    for i in range(1, tp):
        d[i, 1:] += d[i - 1, :-1]
    hi = d[t - 1 : t - 1 + length, t - 1 : t - 1 + length]
    lo = np.zeros((length, length))
    lo[1:, 1:] = d[: length - 1, : length - 1]
    r = (hi - lo) / n
    return m, 0.5 * (r + r.T)


def _correlate_maps(y, kernels):
    """``out[b,j,t] = sum_l kernels[j,l] y[b,j,t+l]`` (valid part)."""
    return fftconvolve(y, kernels[None, :, ::-1], mode="valid", axes=-1)


def temporal_spatial_forward(x, w_temporal, w_spatial, bn=None, mode=INFER, update_running=True):
    """Forward pass; ``bn`` is a :class:`~aadnet.nn.layers.BnState` or ``None`` (no norm).

    Returns ``(z2, cache)`` with ``z2`` of shape ``(B, K*D, 1, T)``.
    """
    L._check4(x)
    L._check_mode(mode)
    b, k_in, c, t = x.shape
    k, _, _, length = w_temporal.shape
    m_maps = w_spatial.shape[0]
    if k_in != 1 or w_temporal.shape[1:3] != (1, 1):
        raise ShapeError(f"fused block needs one input map and (K, 1, 1, L) kernels, got {w_temporal.shape}")
    if w_spatial.shape[1:] != (1, c, 1) or m_maps % k:
        raise ShapeError(f"spatial kernels {w_spatial.shape} do not match C={c}, K={k}")
    depth = m_maps // k
    kidx = np.arange(m_maps) // depth
    wt = w_temporal[:, 0, 0, :]
    ws = w_spatial[:, 0, :, 0]
    wrep = wt[kidx]

    xp = np.pad(x[:, 0], ((0, 0), (0, 0), L.same_pad(length)))
    y = ws @ xp
    q = _correlate_maps(y, wrep)
    cache = FusedCache(xp, y, q, w_temporal, w_spatial, depth, t, mode, bn is not None)
    if bn is None:
        return q[:, :, None, :], cache

    if bn.gamma.shape != (k,):
        raise ShapeError(f"batch norm has {bn.gamma.shape[0]} maps, block has {k}")
    if mode == TRAIN:
        if b * c * t < 2:
            raise DegenerateBatchError(
                f"train-mode batch norm needs at least 2 elements per map, got {b * c * t}"
            )
        lag_m, lag_r = lag_moments(xp, t, length)
        mean = wt @ lag_m
        var = np.maximum(np.einsum("kl,lm,km->k", wt, lag_r, wt) - mean**2, 0.0)
        cache.lag_mean, cache.lag_second = lag_m, lag_r
        if update_running:
            mom = bn.momentum
            bn.running_mean = (1.0 - mom) * bn.running_mean + mom * mean
            bn.running_var = (1.0 - mom) * bn.running_var + mom * var
    else:
        mean, var = bn.running_mean, bn.running_var
    std = np.sqrt(var + bn.eps)
    s_sum = ws.sum(axis=1)
    scale = (bn.gamma / std)[kidx]
    z2 = scale[None, :, None] * (q - (mean[kidx] * s_sum)[None, :, None])
    z2 += (bn.beta[kidx] * s_sum)[None, :, None]
    cache.gamma, cache.beta, cache.mean, cache.std = bn.gamma, bn.beta, mean, std
    return z2[:, :, None, :], cache


def _full_conv_maps(g, kernels):
    """``out[b,j,s] = sum_l kernels[j,l] g[b,j,s-l]`` over the padded length."""
    return fftconvolve(g, kernels[None, :, :], mode="full", axes=-1)


def temporal_spatial_backward(dy, cache, need_dx=False):
    """Gradients as a dict with keys ``w_temporal``, ``w_spatial`` and, with a norm,
    ``gamma`` and ``beta``; ``x`` is added when ``need_dx`` is set."""
    wt = cache.w_temporal[:, 0, 0, :]
    ws = cache.w_spatial[:, 0, :, 0]
    k, length = wt.shape
    m_maps = ws.shape[0]
    depth, t = cache.depth, cache.t
    kidx = np.arange(m_maps) // depth
    wrep = wt[kidx]
    xp, y, q = cache.xp, cache.y, cache.q
    b, c, tp = xp.shape
    n = b * c * t

    g = dy[:, :, 0, :]
    g_sum = g.sum(axis=(0, 2))
    h = _full_conv_maps(g, wrep)
    e = np.einsum("bjs,bcs->jc", h, xp, optimize=True)
    corr = fftconvolve(y, g[:, :, ::-1], mode="valid", axes=-1).sum(axis=0)
    corr_k = corr.reshape(k, depth, length).sum(axis=1)

    out = {}
    if not cache.bn:
        out["w_temporal"] = corr_k[:, None, None, :]
        out["w_spatial"] = e[:, None, :, None]
        if need_dx:
            dxp = np.einsum("jc,bjs->bcs", ws, h, optimize=True)
            out["x"] = _crop(dxp, length, t)
        return out

    gamma, beta, mean, std = cache.gamma, cache.beta, cache.mean, cache.std
    s_sum = ws.sum(axis=1)
    a = gamma / std
    gq = np.einsum("bjt,bjt->j", g, q)
    dbeta = (s_sum * g_sum).reshape(k, depth).sum(axis=1)
    dgamma = ((gq - mean[kidx] * s_sum * g_sum).reshape(k, depth).sum(axis=1)) / std
    dws = a[kidx][:, None] * (e - (mean[kidx] * g_sum)[:, None]) + (beta[kidx] * g_sum)[:, None]
    out["gamma"], out["beta"] = dgamma, dbeta
    out["w_spatial"] = dws[:, None, :, None]

    if cache.mode == TRAIN:
        lag_m, lag_r = cache.lag_mean, cache.lag_second
        dwt = (corr_k - dbeta[:, None] * lag_m[None, :]
               - (dgamma / std)[:, None] * (wt @ lag_r - mean[:, None] * lag_m[None, :]))
    else:
        dwt = corr_k
    out["w_temporal"] = (a[:, None] * dwt)[:, None, None, :]

    if need_dx:
        dxp = np.einsum("jc,bjs->bcs", ws * a[kidx][:, None], h, optimize=True)
        if cache.mode == TRAIN:
            ones_conv = fftconvolve(wt, np.ones((1, t)), mode="full", axes=-1)  # (K, Tp)
            coef_b = a * dbeta / n
            coef_g = a * dgamma / (n * std)
            dxp -= (coef_b - coef_g * mean) @ ones_conv
            z1 = fftconvolve(xp[:, None], wt[None, :, None, ::-1], mode="valid", axes=-1)
            back = fftconvolve(z1, wt[None, :, None, :], mode="full", axes=-1)  # (B, K, C, Tp)
            dxp -= np.einsum("k,bkcs->bcs", coef_g, back)
        out["x"] = _crop(dxp, length, t)
    return out


def _crop(dxp, length, t):
    left, _ = L.same_pad(length)
    return dxp[:, None, :, left : left + t]
