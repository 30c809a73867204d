"""Primal linear SVM trained by deterministic sub-gradient descent."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..exceptions import LabelError, ShapeError


def hinge_objective(w, b, x, s, lam):
    margins = s * (x @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * lam * (w @ w + b * b))


def fit_linear(features, labels, lam=1e-3, epochs=30, seed=0):
    """Minimise mean hinge loss + ``lam/2 * ||(w, b)||^2`` with steps ``1/(lam t)``.

    The bias is handled as an extra constant feature, so it is penalised
    like the weights. Labels must be {0, 1}; internally 1 maps to +1 and 0
    to -1. Returns ``(w, b, trace)`` where ``trace`` is the objective of the
    running-average iterate after every epoch.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ShapeError(f"features (n, d) and labels (n,) expected, got {x.shape} and {y.shape}")
    classes = np.unique(y)
    if classes.size < 2:
        raise LabelError(f"fitting needs both classes, got only {classes.tolist()}")
    if not set(classes.tolist()) <= {0, 1}:
        raise LabelError(f"labels must be 0/1, got {classes.tolist()}")
    s = np.where(y == 1, 1.0, -1.0)
    n, d = x.shape
    rng = np.random.default_rng(seed)
    w, b = np.zeros(d), 0.0
    w_avg, b_avg = np.zeros(d), 0.0
    t = 0
    trace = []
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            violated = s[i] * (x[i] @ w + b) < 1.0
            w *= 1.0 - eta * lam
            b *= 1.0 - eta * lam
            if violated:
                w += eta * s[i] * x[i]
                b += eta * s[i]
            w_avg += (w - w_avg) / t
            b_avg += (b - b_avg) / t
        trace.append(hinge_objective(w_avg, b_avg, x, s, lam))
    return w_avg, float(b_avg), np.array(trace)


class LinearSVM(ClassifierMixin, BaseEstimator):
    """Linear SVM with internal per-feature z-scoring from the training data.

    ``coef_`` and ``intercept_`` act on standardised features.
    """

    def __init__(self, lam=1e-3, epochs=30, seed=0):
        self.lam = lam
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        x = np.asarray(X, dtype=np.float64)
        if x.ndim != 2:
            raise ShapeError(f"features must be (n, d), got shape {x.shape}")
        self.mean_ = x.mean(axis=0)
        std = x.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        self.coef_, self.intercept_, self.loss_trace_ = fit_linear(
            self.standardize(x), y, self.lam, self.epochs, self.seed,
        )
        self.classes_ = np.array([0, 1])
        return self

    def standardize(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_

    def decision_function(self, X):
        if not hasattr(self, "coef_"):
            raise AttributeError("LinearSVM is not fitted")
        return self.standardize(X) @ self.coef_ + self.intercept_

    def predict(self, X):
        return (self.decision_function(X) >= 0).astype(np.int64)

    def predict_proba(self, X):
        """Logistic squashing of the margin; monotone, so rank metrics are unaffected."""
        p1 = 1.0 / (1.0 + np.exp(-np.clip(self.decision_function(X), -500, 500)))
        return np.column_stack([1.0 - p1, p1])
