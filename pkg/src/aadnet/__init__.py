"""AADNet: EEG auditory attention decoding with a compact convolutional network.

Subpackages: ``nn`` (layers and optimizer), ``model`` (the network),
``data`` (trial files and the synthetic generator), ``baselines`` (FBCSP and
PCA with a linear SVM) and ``harness`` (nested cross-validation and reports).
"""

from .estimators import AADNetClassifier
from .exceptions import AADError, FormatError
from .model import ModelConfig, init_model, load_model, save_model
from .preprocess import Preprocessor, WindowSet

__version__ = "0.1.0"

__all__ = [
    "AADError",
    "AADNetClassifier",
    "FormatError",
    "ModelConfig",
    "Preprocessor",
    "WindowSet",
    "init_model",
    "load_model",
    "save_model",
]
