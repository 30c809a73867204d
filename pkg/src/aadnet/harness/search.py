"""Inner-CV grid search over training hyper-parameters."""

from __future__ import annotations

import logging

import numpy as np

from .training import grid_points, train

log = logging.getLogger(__name__)

EPOCH_CAP = 50


def grid_search(x, y, plan, outer_fold, base_cfg, make_params, grid=None, epoch_cap=EPOCH_CAP):
    """Pick the grid point with the best mean inner-fold validation accuracy.

    ``make_params`` returns freshly initialised parameters. Training inside
    the search runs for ``min(epoch_cap, epochs)`` epochs (``epoch_cap=None``
    disables the cap). Ties go to the first point in grid order. Returns
    ``(best_cfg, [(cfg, mean_acc), ...])``.
    """
    points = grid_points(base_cfg, grid)
    x = np.asarray(x)
    y = np.asarray(y)
    test = set(plan.outer[outer_fold].tolist())
    scores = []
    for cfg in points:
        run_cfg = cfg if epoch_cap is None else cfg.replace(epochs=min(epoch_cap, cfg.epochs))
        accs = []
        for i, val in enumerate(plan.inner[outer_fold]):
            tr = plan.inner_train(outer_fold, i)
            if test.intersection(tr.tolist()) or test.intersection(val.tolist()):
                raise AssertionError("grid search touched test-fold windows")
            _, hist = train(make_params(), x[tr], y[tr], x[val], y[val], run_cfg,
                            train_index=tr, val_index=val)
            accs.append(max(hist.val_acc))
        scores.append((cfg, float(np.mean(accs))))
        log.debug("grid %s -> %.4f", cfg, scores[-1][1])
    best = max(range(len(scores)), key=lambda i: (scores[i][1], -i))
    return scores[best][0], scores
