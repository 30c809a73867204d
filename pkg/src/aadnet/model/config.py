"""Architecture configuration and the batch-norm ablation variants."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..exceptions import ConfigError, ParameterError


@dataclass(frozen=True)
class ModelConfig:
    """Hyper-parameters fixing the shape of an AADNet instance.

    ``bn3_both`` controls what the third batch-norm flag covers: both norms
    of the hybrid decoding block (default) or only the one after the
    depthwise temporal convolution. ``max_norm`` is reserved and must stay 0;
    no kernel constraint is applied.
    """

    n_channels: int = 32
    sample_rate: float = 500.0
    window_samples: int = 250
    temporal_kernels: int = 32
    temporal_len: int = 64
    depth_multiplier: int = 2
    sep_len: int = 16
    pool1: int = 4
    pool2: int = 8
    hidden: int = 64
    n_classes: int = 2
    dropout: float = 0.25
    bn1: bool = True
    bn2: bool = True
    bn3: bool = True
    bn3_both: bool = True
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    max_norm: float = 0.0

    def __post_init__(self):
        self.validate()

    @classmethod
    def for_window(cls, window_s, sample_rate=500.0, **kwargs):
        return cls(sample_rate=sample_rate, window_samples=int(round(window_s * sample_rate)), **kwargs)

    def validate(self):
        ints = (
            "n_channels", "window_samples", "temporal_kernels", "temporal_len",
            "depth_multiplier", "sep_len", "pool1", "pool2", "hidden",
        )
        for name in ints:
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_classes != 2:
            raise ConfigError("only two-class decoding is supported")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 < self.bn_momentum < 1.0 or self.bn_eps <= 0:
            raise ConfigError("bn_momentum must lie in (0, 1) and bn_eps must be positive")
        if self.max_norm != 0.0:
            raise ConfigError("max_norm is reserved; kernel constraints are not implemented")
        if self.pooled_len < 1:
            raise ConfigError(
                f"window of {self.window_samples} samples pools to zero length "
                f"with pools {self.pool1} and {self.pool2}"
            )

    @property
    def bn_flags(self):
        return (self.bn1, self.bn2, self.bn3)

    @property
    def spatial_maps(self):
        return self.temporal_kernels * self.depth_multiplier

    @property
    def pooled_len(self):
        return (self.window_samples // self.pool1) // self.pool2

    @property
    def flatten_width(self):
        return self.spatial_maps * self.pooled_len

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


ABLATIONS = ("M1", "M2", "M3")


def ablation_config(base, variant):
    """Return ``base`` with one batch-norm stage removed.

    ``M1`` drops the temporal-block norm, ``M2`` the spatial-block norm and
    ``M3`` the hybrid-decoding norms.
    """
    key = str(variant).upper()
    if key == "M1":
        return base.replace(bn1=False)
    if key == "M2":
        return base.replace(bn2=False)
    if key == "M3":
        return base.replace(bn3=False)
    raise ParameterError(f"unknown ablation variant {variant!r}; expected one of {ABLATIONS}")
