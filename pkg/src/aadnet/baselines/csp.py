"""Common spatial patterns, single band and filter bank."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..exceptions import DegenerateBatchError, LabelError, ParameterError, ShapeError
from ..preprocess import FirSpec, design_fir, filter_array
from .eigen import jacobi_eigh

DEFAULT_BANDS = ((4.0, 8.0), (8.0, 12.0), (12.0, 16.0), (16.0, 24.0), (24.0, 32.0))
SHRINKAGE = 0.05


class BandSkipWarning(UserWarning):
    """A filter-bank band was dropped because the window cannot resolve it."""


@dataclass
class CspModel:
    """Spatial filters for one band.

    ``filters`` is ``(C, 2m)``: the ``m`` largest-eigenvalue filters in
    descending order followed by the ``m`` smallest in ascending order.
    ``eigenvalues`` holds the matching generalized eigenvalues;
    ``whitened_1`` and ``whitened_2`` are the full ascending spectra of the
    two whitened class covariances, solved independently.
    """

    filters: np.ndarray
    eigenvalues: np.ndarray
    cov_1: np.ndarray
    cov_2: np.ndarray
    whitened_1: np.ndarray
    whitened_2: np.ndarray
    band: tuple | None = None

    def features(self, windows):
        return log_variance(windows, self.filters)


def _check_windows(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"windows must be (n, C, T), got shape {x.shape}")
    return x


def normalized_covariance(windows):
    """Mean over windows of ``X X^T / trace(X X^T)``."""
    x = _check_windows(windows)
    cov = np.einsum("nct,ndt->ncd", x, x)
    tr = np.einsum("ncc->n", cov)
    if np.any(tr <= 0):
        raise DegenerateBatchError("a window has zero energy; its covariance cannot be normalised")
    return np.mean(cov / tr[:, None, None], axis=0)


def shrink(cov, rho=SHRINKAGE):
    c = cov.shape[0]
    return (1.0 - rho) * cov + rho * np.trace(cov) / c * np.eye(c)


def log_variance(windows, filters):
    x = _check_windows(windows)
    z = np.einsum("cf,nct->nft", filters, x)
    return np.log(np.var(z, axis=2))


def _split_classes(windows, labels):
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size != 2:
        raise LabelError(f"CSP needs exactly two classes, got {classes.tolist()}")
    x = _check_windows(windows)
    parts = [x[labels == k] for k in classes]
    if min(len(p) for p in parts) < 2:
        raise DegenerateBatchError("CSP needs at least two windows per class")
    return parts


def fit_csp(windows, labels, m=3, rho=SHRINKAGE, band=None):
    """Fit CSP filters solving ``S1 w = lambda (S1 + S2) w`` on shrunk class covariances.

    The composite covariance is whitened with ``P = U D^-1/2 U^T``; the
    eigenvectors of ``P S1 P`` mapped back through ``P`` are the filters.
    """
    x1, x2 = _split_classes(windows, labels)
    c = x1.shape[1]
    if not 1 <= m <= c // 2:
        raise ParameterError(f"m must lie in [1, {c // 2}] for {c} channels, got {m}")
    s1 = shrink(normalized_covariance(x1), rho)
    s2 = shrink(normalized_covariance(x2), rho)
    d, u = jacobi_eigh(s1 + s2)
    if d[0] <= 0:
        raise np.linalg.LinAlgError("composite covariance is singular after shrinkage")
    p = (u / np.sqrt(d)) @ u.T
    lam, b = jacobi_eigh(p @ s1 @ p)
    lam2, _ = jacobi_eigh(p @ s2 @ p)
    w = p @ b
    pick = np.r_[np.arange(c - 1, c - 1 - m, -1), np.arange(m)]
    return CspModel(
        filters=w[:, pick], eigenvalues=lam[pick], cov_1=s1, cov_2=s2,
        whitened_1=lam, whitened_2=lam2, band=band,
    )


def fbcsp_taps(n_samples):
    """Largest odd tap count the reflection-padded filter accepts for this window."""
    taps = n_samples - 1
    return taps if taps % 2 else taps - 1


def band_resolvable(band, n_samples, fs):
    """A band is kept when the window holds at least one cycle of its lower edge."""
    return n_samples / fs >= 1.0 / band[0]


class FilterBankCSP(TransformerMixin, BaseEstimator):
    """Band-pass each window per band, fit CSP per band, emit concatenated log-variance.

    Parameters
    ----------
    fs : float
        Sampling rate of the windows.
    bands : sequence of (low, high) pairs in Hz.
    m : int
        Filter pairs per band.
    rho : float
        Covariance shrinkage weight.
    """

    def __init__(self, fs=500.0, bands=DEFAULT_BANDS, m=3, rho=SHRINKAGE):
        self.fs = fs
        self.bands = bands
        self.m = m
        self.rho = rho

    def _filter(self, x, coeffs):
        return x if coeffs is None else filter_array(x, coeffs)

    def _band_coeffs(self, n_samples):
        kept = []
        for band in self.bands:
            band = (float(band[0]), float(band[1]))
            if not 0 < band[0] < band[1] < self.fs / 2:
                raise ParameterError(f"band {band} must lie inside (0, {self.fs / 2}) Hz")
            if not band_resolvable(band, n_samples, self.fs):
                warnings.warn(
                    f"band {band[0]}-{band[1]} Hz skipped: {n_samples} samples hold less than "
                    f"one cycle of {band[0]} Hz",
                    BandSkipWarning, stacklevel=3,
                )
                continue
            kept.append((band, design_fir(FirSpec(band[0], band[1], fbcsp_taps(n_samples)), self.fs)))
        if not kept:
            raise ParameterError(f"no band of {self.bands} is resolvable with {n_samples}-sample windows")
        return kept

    def fit(self, X, y):
        x = _check_windows(X)
        self.n_samples_ = x.shape[2]
        self.models_, self.coeffs_ = [], []
        for band, coeffs in self._band_coeffs(self.n_samples_):
            self.models_.append(fit_csp(self._filter(x, coeffs), y, self.m, self.rho, band))
            self.coeffs_.append(coeffs)
        self.n_features_out_ = 2 * self.m * len(self.models_)
        return self

    def transform(self, X):
        if not hasattr(self, "models_"):
            raise AttributeError("FilterBankCSP is not fitted")
        x = _check_windows(X)
        if x.shape[2] != self.n_samples_:
            raise ShapeError(f"fitted on {self.n_samples_}-sample windows, got {x.shape[2]}")
        feats = [m.features(self._filter(x, c)) for m, c in zip(self.models_, self.coeffs_)]
        return np.concatenate(feats, axis=1)


class CSP(TransformerMixin, BaseEstimator):
    """Single-band CSP on already filtered windows."""

    def __init__(self, m=3, rho=SHRINKAGE):
        self.m = m
        self.rho = rho

    def fit(self, X, y):
        self.model_ = fit_csp(X, y, self.m, self.rho)
        return self

    def transform(self, X):
        if not hasattr(self, "model_"):
            raise AttributeError("CSP is not fitted")
        return self.model_.features(X)
