"""Label-stratified nested fold plans over window indices."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..exceptions import FoldError

N_OUTER = 5
N_INNER = 5
MIN_WINDOWS = 25


def stratified_split(labels, k, rng):
    """Split positions ``0..n-1`` into ``k`` folds.

    Each class is shuffled separately; the shuffled classes are laid end to
    end and dealt round-robin, so fold sizes differ by at most one and every
    class count per fold is ``floor`` or ``ceil`` of its share.
    """
    labels = np.asarray(labels)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    return [np.sort(order[j::k]) for j in range(k)]


@dataclass(frozen=True)
class FoldPlan:
    """``outer[j]`` are test indices of grand fold j; ``inner[j][i]`` partitions its train set."""

    subject_id: str
    seed: int
    outer: tuple
    inner: tuple
    unit: str = "window"

    @property
    def n_windows(self):
        return int(sum(len(f) for f in self.outer))

    def outer_train(self, j):
        return np.sort(np.concatenate([f for i, f in enumerate(self.outer) if i != j]))

    def inner_train(self, j, i):
        return np.sort(np.concatenate([f for m, f in enumerate(self.inner[j]) if m != i]))

    def digest(self):
        """SHA-256 over the subject id, seed and every index set, in order."""
        h = hashlib.sha256()
        h.update(f"{self.subject_id}|{self.seed}|".encode())
        if self.unit != "window":
            h.update(f"{self.unit}|".encode())
        for j, fold in enumerate(self.outer):
            h.update(b"O")
            h.update(np.asarray(fold, dtype="<i8").tobytes())
            for sub in self.inner[j]:
                h.update(b"I")
                h.update(np.asarray(sub, dtype="<i8").tobytes())
        return h.hexdigest()


def make_folds(labels, seed, subject_id="", n_outer=N_OUTER, n_inner=N_INNER):
    """Build a nested plan over ``len(labels)`` windows; deterministic given ``seed``."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < max(MIN_WINDOWS, n_outer * n_inner):
        raise FoldError(f"need at least {max(MIN_WINDOWS, n_outer * n_inner)} windows for nested folds, got {n}")
    rng = np.random.default_rng(seed)
    outer = stratified_split(labels, n_outer, rng)
    inner = []
    for j in range(n_outer):
        train = np.sort(np.concatenate([f for i, f in enumerate(outer) if i != j]))
        parts = stratified_split(labels[train], n_inner, rng)
        inner.append(tuple(train[p] for p in parts))
    return FoldPlan(str(subject_id), int(seed), tuple(outer), tuple(inner))


def make_trial_folds(labels, trial_ids, seed, subject_id="", n_outer=N_OUTER, n_inner=N_INNER):
    """Nested plan that keeps every trial's windows inside a single fold.

    Trials are stratified by their label and dealt like windows in
    :func:`make_folds`; fold sizes in windows then follow the trial lengths.
    """
    labels = np.asarray(labels)
    trial_ids = np.asarray(trial_ids)
    trials, first = np.unique(trial_ids, return_index=True)
    trial_labels = labels[first]
    for t, lab in zip(trials, trial_labels):
        if np.any(labels[trial_ids == t] != lab):
            raise FoldError(f"trial {t} mixes labels")
    n_trials = trials.size
    if n_trials < n_outer or n_trials - -(-n_trials // n_outer) < n_inner:
        raise FoldError(f"{n_trials} trials are too few for {n_outer}x{n_inner} trial-level folds")
    rng = np.random.default_rng(seed)

    def windows_of(trial_pos):
        return np.flatnonzero(np.isin(trial_ids, trials[trial_pos]))

    outer_t = stratified_split(trial_labels, n_outer, rng)
    outer = tuple(windows_of(f) for f in outer_t)
    inner = []
    for j in range(n_outer):
        train_t = np.sort(np.concatenate([f for i, f in enumerate(outer_t) if i != j]))
        parts = stratified_split(trial_labels[train_t], n_inner, rng)
        inner.append(tuple(windows_of(train_t[p]) for p in parts))
    return FoldPlan(str(subject_id), int(seed), outer, tuple(inner), unit="trial")


def verify_plan(plan, labels=None):
    """Raise :class:`FoldError` unless the partition (and, with labels, stratification) contracts hold."""
    n = plan.n_windows
    everything = np.concatenate(plan.outer)
    if everything.size != n or np.unique(everything).size != n or set(everything.tolist()) != set(range(n)):
        raise FoldError("outer folds are not a disjoint cover of the windows")
    sizes = [len(f) for f in plan.outer]
    if plan.unit == "window" and max(sizes) - min(sizes) > 1:
        raise FoldError(f"outer fold sizes {sizes} differ by more than one")
    for j, test in enumerate(plan.outer):
        train = plan.outer_train(j)
        if np.intersect1d(train, test).size:
            raise FoldError(f"outer fold {j}: train and test overlap")
        inner = np.concatenate(plan.inner[j])
        if inner.size != train.size or not np.array_equal(np.sort(inner), train):
            raise FoldError(f"outer fold {j}: inner folds do not partition the outer-train set")
    if labels is not None and plan.unit == "window":
        labels = np.asarray(labels)
        groups = [(plan.outer, np.arange(n))] + [
            (plan.inner[j], plan.outer_train(j)) for j in range(len(plan.outer))
        ]
        for folds, pool in groups:
            k = len(folds)
            for c in np.unique(labels[pool]):
                share = np.sum(labels[pool] == c) / k
                for f in folds:
                    count = np.sum(labels[f] == c)
                    if abs(count - share) >= 1:
                        raise FoldError(f"class {c}: fold holds {count}, share is {share:.2f}")
    return True
