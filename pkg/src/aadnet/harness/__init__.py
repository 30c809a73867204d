"""Training loop, nested cross-validation, metrics, ablation and report export."""

from .embedding import class_separation, export_embedding, hidden_markers
from .evaluate import (
    BASELINE,
    MODELS,
    AblationReport,
    EvalReport,
    EvalSpec,
    SubjectResult,
    aggregate,
    evaluate_outer,
    run_ablation,
    unit_seed,
)
from .folds import FoldPlan, make_folds, make_trial_folds, verify_plan
from .metrics import ConfusionCounts, metrics, pair_auc, roc
from .search import grid_search
from .training import GRID, TrainConfig, TrainHistory, grid_points, train

__all__ = [
    "BASELINE",
    "GRID",
    "MODELS",
    "AblationReport",
    "ConfusionCounts",
    "EvalReport",
    "EvalSpec",
    "FoldPlan",
    "SubjectResult",
    "TrainConfig",
    "TrainHistory",
    "aggregate",
    "class_separation",
    "evaluate_outer",
    "export_embedding",
    "grid_points",
    "grid_search",
    "hidden_markers",
    "make_folds",
    "make_trial_folds",
    "metrics",
    "pair_auc",
    "roc",
    "run_ablation",
    "train",
    "unit_seed",
    "verify_plan",
]
