"""Nested cross-validated evaluation per subject, and the batch-norm ablation."""

from __future__ import annotations

import dataclasses
import logging
import zlib
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ..baselines import make_fbcsp_pipeline, make_pca_pipeline
from ..exceptions import ParameterError
from ..model import ABLATIONS, ModelConfig, ablation_config, init_model
from .folds import make_folds, make_trial_folds
from .metrics import METRIC_NAMES, ConfusionCounts, metrics, roc
from .search import EPOCH_CAP, grid_search
from .training import TrainConfig, predict_proba, train

log = logging.getLogger(__name__)

MODELS = ("aadnet", "fbcsp", "pca")
BASELINE = "baseline"
REPORT_METRICS = METRIC_NAMES + ("AUC",)


def unit_seed(seed, *keys):
    """Independent 32-bit seed for a work unit, stable across processes."""
    entropy = [int(seed)] + [zlib.crc32(str(k).encode("utf-8")) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


@dataclass
class EvalSpec:
    """Everything a work unit needs besides the data."""

    task: str
    window_s: float
    model: str = "aadnet"
    variant: str = BASELINE
    cfg: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    grid: dict | None = None
    epoch_cap: int | None = EPOCH_CAP
    model_config: ModelConfig | None = None
    fs: float = 500.0
    cv_unit: str = "window"

    def network_config(self, n_channels, n_samples):
        base = self.model_config or ModelConfig(
            n_channels=n_channels, sample_rate=self.fs, window_samples=n_samples
        )
        return base if self.variant == BASELINE else ablation_config(base, self.variant)


@dataclass
class UnitResult:
    subject: str
    fold: int
    test_index: np.ndarray
    scores: np.ndarray
    labels: np.ndarray
    cfg: dict
    plan_digest: str


@dataclass
class SubjectResult:
    subject: str
    task: str
    window_s: float
    model: str
    variant: str
    counts: ConfusionCounts
    values: dict
    undefined: dict
    fpr: np.ndarray
    tpr: np.ndarray
    plan_digest: str
    fold_configs: list

    def row(self):
        return {"subject": self.subject, "task": self.task, "window_s": self.window_s,
                "model": self.model, "variant": self.variant,
                **{k: self.values[k] for k in REPORT_METRICS}}


@dataclass
class EvalReport:
    """Per-subject results plus mean and SD (n - 1 denominator) across subjects."""

    subjects: list
    mean: dict
    sd: dict
    spec: EvalSpec

    @property
    def plan_digests(self):
        return {r.subject: r.plan_digest for r in self.subjects}

    def aggregate_row(self):
        return {"subject": "mean", "task": self.spec.task, "window_s": self.spec.window_s,
                "model": self.spec.model, "variant": self.spec.variant, **self.mean}

    def sd_row(self):
        return {**self.aggregate_row(), "subject": "sd", **self.sd}


def _fit_predict(spec, x, y, plan, j, subject):
    train_idx = plan.outer_train(j)
    test_idx = plan.outer[j]
    if np.intersect1d(train_idx, test_idx).size:
        raise AssertionError("outer train and test folds overlap")
    s_init = unit_seed(spec.seed, "init", subject, j)
    s_train = unit_seed(spec.seed, "train", subject, j)
    if spec.model == "aadnet":
        net_cfg = spec.network_config(x.shape[1], x.shape[2])
        cfg = spec.cfg.replace(seed=s_train)
        if spec.grid is not None:
            cfg, _ = grid_search(x, y, plan, j, cfg, lambda: init_model(net_cfg, s_init),
                                 spec.grid, spec.epoch_cap)
        params, _ = train(init_model(net_cfg, s_init), x[train_idx], y[train_idx], cfg=cfg)
        scores = predict_proba(params, x[test_idx])
        cfg_dict = cfg.as_dict()
    else:
        make = make_fbcsp_pipeline if spec.model == "fbcsp" else make_pca_pipeline
        kwargs = {"fs": spec.fs} if spec.model == "fbcsp" else {}
        pipe = make(seed=s_train, **kwargs).fit(x[train_idx], y[train_idx])
        scores = pipe.predict_proba(x[test_idx])[:, 1]
        cfg_dict = {"seed": s_train, **{k: v for k, v in pipe.get_params().items() if "__" in k}}
    return scores, test_idx, cfg_dict


def _run_unit(spec, x, y, plan, j, subject):
    scores, test_idx, cfg = _fit_predict(spec, x, y, plan, j, subject)
    return UnitResult(subject, j, test_idx, scores, y[test_idx], cfg, plan.digest())


def _summarize(spec, subject, units):
    units = sorted(units, key=lambda u: u.fold)
    scores = np.concatenate([u.scores for u in units])
    labels = np.concatenate([u.labels for u in units])
    preds = (scores >= 0.5).astype(np.int64)
    counts = ConfusionCounts.from_predictions(labels, preds)
    values, undefined = metrics(counts)
    if labels.min() != labels.max():
        fpr, tpr, _, auc = roc(scores, labels)
    else:
        fpr, tpr, auc = np.array([0.0, 1.0]), np.array([0.0, 1.0]), 0.0
        undefined["AUC"] = True
    values["AUC"] = auc
    undefined.setdefault("AUC", False)
    return SubjectResult(subject, spec.task, spec.window_s, spec.model, spec.variant, counts,
                         values, undefined, fpr, tpr, units[0].plan_digest,
                         [u.cfg for u in units])


CV_UNITS = ("window", "trial")


def plan_for(windows, subject, spec):
    """Fold plan of one subject; ``spec.cv_unit`` picks window- or trial-level splits."""
    sub = windows.for_subject(subject)
    labels = sub.labels(spec.task)
    seed = unit_seed(spec.seed, "folds", subject)
    if spec.cv_unit == "trial":
        return make_trial_folds(labels, sub.trial_id, seed, subject)
    return make_folds(labels, seed, subject)


def evaluate_outer(windows, spec, n_jobs=1):
    """Nested CV for every subject in ``windows``; returns an :class:`EvalReport`.

    Work units are (subject, outer fold) pairs; they share nothing and are
    merged in sorted order, so ``n_jobs`` does not change the result.
    """
    if spec.model not in MODELS:
        raise ParameterError(f"unknown model {spec.model!r}; expected one of {MODELS}")
    if spec.variant != BASELINE and spec.model != "aadnet":
        raise ParameterError("batch-norm ablations apply to aadnet only")
    if spec.cv_unit not in CV_UNITS:
        raise ParameterError(f"unknown cv_unit {spec.cv_unit!r}; expected one of {CV_UNITS}")
    spec = dataclasses.replace(spec, fs=windows.fs)
    work = []
    for subject in windows.subjects():
        sub = windows.for_subject(subject)
        y = sub.labels(spec.task)
        plan = plan_for(windows, subject, spec)
        work.extend((spec, sub.X, y, plan, j, subject) for j in range(len(plan.outer)))
    if n_jobs == 1:
        units = [_run_unit(*args) for args in work]
    else:
        units = Parallel(n_jobs=n_jobs)(delayed(_run_unit)(*args) for args in work)
    by_subject = {}
    for u in units:
        by_subject.setdefault(u.subject, []).append(u)
    results = [_summarize(spec, s, by_subject[s]) for s in sorted(by_subject)]
    mean, sd = aggregate(results)
    return EvalReport(results, mean, sd, spec)


def aggregate(results):
    """Mean and sample SD of every metric across subjects; SD is 0 for a single subject."""
    mean, sd = {}, {}
    for key in REPORT_METRICS:
        vals = np.array([r.values[key] for r in results], dtype=np.float64)
        mean[key] = float(vals.mean())
        sd[key] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return mean, sd


@dataclass
class AblationReport:
    task: str
    baseline: EvalReport
    variants: dict

    TABLE_COLUMNS = ("ACC", "SPE", "SEN", "PRE", "F1")

    def rows(self):
        """One row per variant: mean and SD of every table metric."""
        out = []
        for name in sorted(self.variants):
            rep = self.variants[name]
            out.append({"task": self.task, "variant": name,
                        **{k: (rep.mean[k], rep.sd[k]) for k in self.TABLE_COLUMNS}})
        return out

    def acc_drops(self):
        """Baseline ACC minus variant ACC, recorded as an observation."""
        return {k: self.baseline.mean["ACC"] - v.mean["ACC"] for k, v in self.variants.items()}

    def plans_match(self):
        ref = self.baseline.plan_digests
        return all(v.plan_digests == ref for v in self.variants.values())


def run_ablation(windows, spec, variants=ABLATIONS, n_jobs=1):
    """Evaluate the unablated network and each variant on identical fold plans and seeds."""
    base = evaluate_outer(windows, dataclasses.replace(spec, model="aadnet", variant=BASELINE), n_jobs)
    reports = {}
    for v in variants:
        key = str(v).upper()
        reports[key] = evaluate_outer(
            windows, dataclasses.replace(spec, model="aadnet", variant=key), n_jobs
        )
    report = AblationReport(spec.task, base, reports)
    if not report.plans_match():
        raise AssertionError("ablation variants ran on different fold plans")
    return report
