"""scikit-learn style wrappers around the network and the baselines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .baselines import make_fbcsp_pipeline, make_pca_pipeline
from .exceptions import LabelError, ShapeError
from .harness.training import TrainConfig, predict_proba, train
from .model import ModelConfig, ablation_config, init_model, load_model, save_model


class AADNetClassifier(ClassifierMixin, BaseEstimator):
    """AADNet on ``(n, C, T)`` windows with labels in {0, 1}.

    Parameters
    ----------
    fs : float
        Sampling rate of the windows.
    variant : {"baseline", "M1", "M2", "M3"}
        Full network or one of the batch-norm ablations.
    lr, batch, epochs, weight_decay : training hyper-parameters.
    validation_fraction : float
        Share of the training windows held out for best-epoch selection;
        0 trains on everything and keeps the last epoch.
    random_state : int
        Seeds initialization, shuffling and dropout.
    """

    def __init__(self, fs=500.0, variant="baseline", lr=1e-3, batch=20, epochs=100,
                 weight_decay=1e-2, validation_fraction=0.0, random_state=0):
        self.fs = fs
        self.variant = variant
        self.lr = lr
        self.batch = batch
        self.epochs = epochs
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _windows(self, X):
        x = np.asarray(X, dtype=np.float64)
        if x.ndim != 3:
            raise ShapeError(f"windows must be (n, C, T), got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("windows contain non-finite values")
        return x

    def _network_config(self, n_channels, n_samples):
        cfg = ModelConfig(n_channels=n_channels, sample_rate=float(self.fs), window_samples=n_samples)
        return cfg if self.variant == "baseline" else ablation_config(cfg, self.variant)

    def fit(self, X, y):
        x = self._windows(X)
        y = np.asarray(y)
        if y.shape != (x.shape[0],):
            raise ShapeError(f"need one label per window, got {y.shape} for {x.shape[0]} windows")
        if not np.all(np.isin(y, (0, 1))):
            raise LabelError("labels must be 0 or 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        self.classes_ = np.array([0, 1])
        seed = int(self.random_state)
        net = self._network_config(x.shape[1], x.shape[2])
        cfg = TrainConfig(lr=self.lr, batch=self.batch, epochs=self.epochs,
                          weight_decay=self.weight_decay, seed=seed)
        tr = np.arange(x.shape[0])
        va = tr[:0]
        if self.validation_fraction > 0:
            perm = np.random.default_rng([seed, 2]).permutation(x.shape[0])
            n_val = max(1, int(round(self.validation_fraction * x.shape[0])))
            va, tr = np.sort(perm[:n_val]), np.sort(perm[n_val:])
        self.params_, self.history_ = train(
            init_model(net, seed), x[tr], y[tr], x[va] if va.size else None,
            y[va] if va.size else None, cfg, tr, va,
        )
        self.n_features_in_ = x.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        x = self._windows(X)
        cfg = self.params_.config
        if x.shape[1:] != (cfg.n_channels, cfg.window_samples):
            raise ShapeError(
                f"fitted on ({cfg.n_channels}, {cfg.window_samples}) windows, got {x.shape[1:]}"
            )
        p1 = predict_proba(self.params_, x)
        return np.stack([1.0 - p1, p1], axis=1)

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

    def save(self, path):
        check_is_fitted(self, "params_")
        return save_model(self.params_, path)

    @classmethod
    def from_checkpoint(cls, path):
        params = load_model(path)
        est = cls(fs=params.config.sample_rate)
        est.params_ = params
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = params.config.n_channels
        return est


__all__ = ["AADNetClassifier", "make_fbcsp_pipeline", "make_pca_pipeline"]
