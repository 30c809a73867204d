"""Principal component analysis with a deterministic sign convention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..exceptions import ParameterError, ShapeError
from .eigen import jacobi_eigh

JACOBI_MAX_DIM = 64


@dataclass
class PcaModel:
    """``components`` is ``(q, d)`` with orthonormal rows, eigenvalues descending."""

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    total_variance: float

    @property
    def q(self):
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self):
        return self.eigenvalues / self.total_variance if self.total_variance > 0 else (
            np.zeros_like(self.eigenvalues))

    def project(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components.T

    def reconstruct(self, z):
        return np.asarray(z, dtype=np.float64) @ self.components + self.mean


def _fix_signs(vectors):
    """Flip each row so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def fit_pca(features, q, solver="auto"):
    """Top-``q`` principal axes of the sample covariance (``n - 1`` denominator).

    ``solver="jacobi"`` diagonalises the covariance with the in-house Jacobi
    routine; ``"svd"`` takes the thin SVD of the centred data (LAPACK) and is
    what ``"auto"`` picks above ``JACOBI_MAX_DIM`` features.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"features must be (n, d), got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise ParameterError("PCA needs at least two samples")
    if not 1 <= q <= min(n - 1, d):
        raise ParameterError(f"q must lie in [1, {min(n - 1, d)}], got {q}")
    if solver == "auto":
        solver = "jacobi" if d <= JACOBI_MAX_DIM else "svd"
    mean = x.mean(axis=0)
    xc = x - mean
    if solver == "jacobi":
        cov = xc.T @ xc / (n - 1)
        w, v = jacobi_eigh(cov)
        order = np.argsort(-w, kind="stable")[:q]
        vals, vecs = w[order], v[:, order].T
        total = float(np.trace(cov))
    elif solver == "svd":
        _, s, vt = np.linalg.svd(xc, full_matrices=False)
        vals, vecs = s[:q] ** 2 / (n - 1), vt[:q]
        total = float(np.sum(s**2) / (n - 1))
    else:
        raise ParameterError(f"unknown solver {solver!r}; expected auto, jacobi or svd")
    return PcaModel(mean, _fix_signs(vecs), np.maximum(vals, 0.0), total)


class PCA(TransformerMixin, BaseEstimator):
    """Estimator wrapper; windows of any rank are flattened per sample."""

    def __init__(self, q=32, solver="auto"):
        self.q = q
        self.solver = solver

    @staticmethod
    def _flat(X):
        x = np.asarray(X, dtype=np.float64)
        return x.reshape(x.shape[0], -1)

    def fit(self, X, y=None):
        x = self._flat(X)
        q = min(self.q, x.shape[0] - 1, x.shape[1])
        self.model_ = fit_pca(x, q, self.solver)
        return self

    def transform(self, X):
        if not hasattr(self, "model_"):
            raise AttributeError("PCA is not fitted")
        return self.model_.project(self._flat(X))
