"""AADNet architecture: configuration, parameters, forward/backward, checkpoints."""

from .checkpoint import load_model, save_model
from .config import ABLATIONS, ModelConfig, ablation_config
from .network import (
    ModelParams,
    backward,
    count_parameters,
    forward,
    init_model,
    param_shapes,
    predict,
    predict_proba,
)

__all__ = [
    "ABLATIONS",
    "ModelConfig",
    "ModelParams",
    "ablation_config",
    "backward",
    "count_parameters",
    "forward",
    "init_model",
    "load_model",
    "param_shapes",
    "predict",
    "predict_proba",
    "save_model",
]
