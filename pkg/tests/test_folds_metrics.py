import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aadnet.exceptions import EmptyEvaluationError, FoldError
from aadnet.harness.folds import make_folds, make_trial_folds, verify_plan
from aadnet.harness.metrics import ConfusionCounts, metrics, pair_auc, roc


def brute_auc(scores, labels):
    """Fraction of (positive, negative) pairs ranked correctly, ties counted half."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


# ---------------------------------------------------------------- folds


def test_fold_sizes():
    labels = np.arange(100) % 2
    assert sorted(len(f) for f in make_folds(labels, 0).outer) == [20] * 5
    labels = np.arange(103) % 2
    assert sorted((len(f) for f in make_folds(labels, 0).outer), reverse=True) == [21, 21, 21, 20, 20]


def test_random_plans_hold_all_contracts():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(25, 400))
        labels = (rng.random(n) < rng.uniform(0.2, 0.8)).astype(int)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        plan = make_folds(labels, int(rng.integers(2**31)))
        assert verify_plan(plan, labels)
        for j in range(5):
            union = np.sort(np.concatenate(plan.inner[j]))
            np.testing.assert_array_equal(union, plan.outer_train(j))


def test_plans_are_deterministic():
    labels = np.arange(60) % 2
    assert make_folds(labels, 9, "S01").digest() == make_folds(labels, 9, "S01").digest()
    assert make_folds(labels, 9, "S01").digest() != make_folds(labels, 10, "S01").digest()


def test_too_few_windows():
    with pytest.raises(FoldError):
        make_folds(np.arange(24) % 2, 0)


def test_verify_plan_detects_overlap():
    labels = np.arange(50) % 2
    plan = make_folds(labels, 0)
    broken = type(plan)(plan.subject_id, plan.seed, (plan.outer[0], plan.outer[0]) + plan.outer[2:], plan.inner)
    with pytest.raises(FoldError):
        verify_plan(broken)


def test_trial_level_folds_keep_trials_whole():
    trial_ids = np.repeat(np.arange(12), 10)
    labels = np.repeat(np.arange(12) % 2, 10)
    plan = make_trial_folds(labels, trial_ids, 4)
    assert verify_plan(plan, labels)
    for fold in plan.outer:
        for t in np.unique(trial_ids[fold]):
            assert set(np.flatnonzero(trial_ids == t)) <= set(fold.tolist())
    with pytest.raises(FoldError):
        make_trial_folds(labels[:40], trial_ids[:40], 4)


# ---------------------------------------------------------------- metrics


def test_metric_example():
    v, undef = metrics(ConfusionCounts(tp=3, tn=2, fp=1, fn=2))
    assert v["ACC"] == 0.625 and v["PRE"] == 0.75 and v["SEN"] == 0.6
    assert v["SPE"] == pytest.approx(2 / 3) and v["F1"] == pytest.approx(2 / 3)
    assert not any(undef.values())


def test_perfect_and_undefined():
    v, _ = metrics(ConfusionCounts(5, 4, 0, 0))
    assert all(x == 1.0 for x in v.values())
    v, undef = metrics(ConfusionCounts(0, 4, 0, 3))
    assert v["PRE"] == 0 and undef["PRE"] and undef["F1"]
    with pytest.raises(EmptyEvaluationError):
        metrics(ConfusionCounts(0, 0, 0, 0))


def test_metrics_against_recount_on_random_configurations():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        y, p = rng.integers(0, 2, n), rng.integers(0, 2, n)
        v, _ = metrics(ConfusionCounts.from_predictions(y, p))
        tp = sum(1 for a, b in zip(y, p) if a == 1 and b == 1)
        tn = sum(1 for a, b in zip(y, p) if a == 0 and b == 0)
        fp = sum(1 for a, b in zip(y, p) if a == 0 and b == 1)
        fn = sum(1 for a, b in zip(y, p) if a == 1 and b == 0)
        assert v["ACC"] == (tp + tn) / n
        assert v["PRE"] == (tp / (tp + fp) if tp + fp else 0.0)
        assert v["SEN"] == (tp / (tp + fn) if tp + fn else 0.0)
        assert v["SPE"] == (tn / (tn + fp) if tn + fp else 0.0)
        pre, sen = v["PRE"], v["SEN"]
        assert v["F1"] == (2 * pre * sen / (pre + sen) if pre + sen else 0.0)


def test_roc_examples():
    assert roc(np.array([0.1, 0.2, 0.8, 0.9]), np.array([0, 0, 1, 1]))[3] == 1.0
    assert roc(np.full(6, 0.3), np.array([0, 1, 0, 1, 1, 0]))[3] == 0.5
    fpr, tpr, _, auc = roc(np.array([0.1, 0.4, 0.35, 0.8]), np.array([0, 0, 1, 1]))
    assert auc == 0.75
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0, 0, 1, 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 200), st.integers(0, 10**6), st.integers(2, 30))
def test_auc_equals_pair_statistic(n, seed, levels):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    scores = rng.integers(0, levels, n) / levels  # coarse scores force ties
    _, _, _, auc = roc(scores, labels)
    ref = brute_auc(scores, labels)
    assert abs(auc - ref) < 1e-12
    assert abs(pair_auc(scores, labels) - ref) < 1e-12
