"""Numerical kernels: layers with analytic gradients and the Adam optimizer."""

from .layers import INFER, TRAIN, BnState, softmax_xent
from .optim import AdamState, adam_step

__all__ = ["INFER", "TRAIN", "AdamState", "BnState", "adam_step", "softmax_xent"]
