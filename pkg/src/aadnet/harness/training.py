"""Mini-batch Adam training of an AADNet parameter set."""

from __future__ import annotations

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NonFiniteError, ParameterError, ShapeError
from ..model import network
from ..nn import TRAIN, AdamState, adam_step, softmax_xent

log = logging.getLogger(__name__)

GRID = {
    "lr": (1e-1, 1e-2, 1e-3, 1e-4),
    "batch": (10, 20, 50),
    "epochs": (20, 50, 100, 150, 200),
    "weight_decay": (1e-1, 1e-2, 1e-3),
}
GRID_ORDER = ("lr", "batch", "epochs", "weight_decay")
EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch: int = 20
    epochs: int = 100
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def validate(self):
        if self.lr < 0 or self.weight_decay < 0:
            raise ParameterError("lr and weight_decay must be non-negative")
        if self.batch < 1 or self.epochs < 1:
            raise ParameterError("batch and epochs must be >= 1")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


def grid_points(base, grid=None):
    """Every grid combination applied to ``base``, lr-major then batch, epochs, weight decay."""
    grid = GRID if grid is None else grid
    keys = [k for k in GRID_ORDER if k in grid] + [k for k in grid if k not in GRID_ORDER]
    if any(len(grid[k]) == 0 for k in keys):
        raise ParameterError("grid has an empty axis")
    return [base.replace(**dict(zip(keys, combo))) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = -1


def as_network_input(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[:, None]
    if x.ndim != 4:
        raise ShapeError(f"windows must be (n, C, T) or (n, 1, C, T), got {x.shape}")
    return x


def predict_proba(params, x, batch=EVAL_BATCH):
    """Positive-class probabilities in inference mode, evaluated in chunks."""
    x = as_network_input(x)
    out = [network.predict_proba(params, x[i : i + batch])[:, 1] for i in range(0, len(x), batch)]
    return np.concatenate(out) if out else np.zeros(0)


def accuracy(params, x, y):
    return float(np.mean(network.labels_from_proba(predict_proba(params, x)) == np.asarray(y)))


def train(params, x_train, y_train, x_val=None, y_val=None, cfg=None,
          train_index=None, val_index=None):
    """Train a copy of ``params``; returns ``(best_params, history)``.

    The epoch with the highest validation accuracy wins (earliest on ties).
    Without validation data the final epoch is returned. When window
    indices are supplied the train and validation sets must be disjoint.
    """
    cfg = (cfg or TrainConfig()).validate()
    if train_index is not None and val_index is not None:
        if np.intersect1d(train_index, val_index).size:
            raise ParameterError("train and validation windows overlap")
    x_train = as_network_input(x_train)
    y_train = np.asarray(y_train)
    has_val = x_val is not None and len(x_val) > 0
    params = params.copy()
    opt = AdamState.zeros_like(params.weights)
    no_decay = params.no_decay
    shuffle_rng = np.random.default_rng([cfg.seed, 0])
    dropout_rng = np.random.default_rng([cfg.seed, 1])
    hist = TrainHistory()
    best, best_acc = None, -np.inf
    n = len(x_train)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch)):
            idx = order[start : start + cfg.batch]
            logits, cache = network.forward(params, x_train[idx], TRAIN, dropout_rng)
            loss, _, d_logits = softmax_xent(logits, y_train[idx])
            if not np.isfinite(loss):
                raise NonFiniteError(f"non-finite loss at epoch {epoch} batch {b}")
            grads = network.backward(params, cache, d_logits)
            try:
                adam_step(params.weights, grads, opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps,
                          cfg.weight_decay, no_decay)
            except NonFiniteError as exc:
                raise NonFiniteError(f"epoch {epoch} batch {b}: {exc}") from None
            total += loss * len(idx)
        hist.train_loss.append(total / n)
        if has_val:
            acc = accuracy(params, x_val, y_val)
            hist.val_acc.append(acc)
            if acc > best_acc:
                best_acc, best, hist.best_epoch = acc, params.copy(), epoch
        log.debug("epoch %d loss %.5f val %s", epoch, hist.train_loss[-1],
                  hist.val_acc[-1] if has_val else "-")
    if best is None:
        best, hist.best_epoch = params, cfg.epochs - 1
    return best, hist
