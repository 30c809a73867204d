"""Confusion counts, the five threshold metrics and the ROC curve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import EmptyEvaluationError, LabelError, ParameterError

METRIC_NAMES = ("ACC", "F1", "PRE", "SEN", "SPE")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ParameterError(f"{name} must be a non-negative integer, got {v}")

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def from_predictions(cls, y_true, y_pred):
        y_true = np.asarray(y_true).astype(bool)
        y_pred = np.asarray(y_pred).astype(bool)
        return cls(int(np.sum(y_true & y_pred)), int(np.sum(~y_true & ~y_pred)),
                   int(np.sum(~y_true & y_pred)), int(np.sum(y_true & ~y_pred)))


def _ratio(num, den):
    return (num / den, False) if den else (0.0, True)


def metrics(counts):
    """Return ``(values, undefined)``: metric dicts, the second flagging zero denominators."""
    if counts.total == 0:
        raise EmptyEvaluationError("no windows were evaluated")
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    values, undefined = {}, {}
    values["ACC"], undefined["ACC"] = (tp + tn) / counts.total, False
    values["PRE"], undefined["PRE"] = _ratio(tp, tp + fp)
    values["SEN"], undefined["SEN"] = _ratio(tp, tp + fn)
    values["SPE"], undefined["SPE"] = _ratio(tn, tn + fp)
    pre, sen = values["PRE"], values["SEN"]
    values["F1"], undefined["F1"] = _ratio(2 * pre * sen, pre + sen)
    undefined["F1"] = undefined["F1"] or undefined["PRE"] or undefined["SEN"]
    return values, undefined


def roc(scores, labels):
    """ROC points at every distinct score plus the trapezoid AUC.

    Returns ``(fpr, tpr, thresholds, auc)``; a window counts as positive when
    its score is ``>= threshold``. The first point is (0, 0) at +inf.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ParameterError("scores and labels must be 1-D arrays of equal length")
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise LabelError("ROC needs both classes among the labels")
    order = np.argsort(-scores, kind="stable")
    s_sorted, p_sorted = scores[order], pos[order]
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), s_sorted.size - 1]
    tps = np.cumsum(p_sorted)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thresholds = np.r_[np.inf, s_sorted[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return fpr, tpr, thresholds, auc


def pair_auc(scores, labels):
    """Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie), by enumeration."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    sp, sn = scores[labels == 1], scores[labels != 1]
    if sp.size == 0 or sn.size == 0:
        raise LabelError("AUC needs both classes among the labels")
    diff = sp[:, None] - sn[None, :]
    return float((np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / diff.size)
