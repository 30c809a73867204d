"""Adam with decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NonFiniteError, ShapeError


@dataclass
class AdamState:
    """First/second moment estimates keyed like the parameters, plus the step count."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params,
    grads,
    state,
    lr=1e-3,
    beta1=0.9,
    beta2=0.999,
    eps=1e-8,
    weight_decay=0.0,
    no_decay=(),
):
    """Apply one Adam update to ``params`` in place and advance ``state``.

    Weight decay is decoupled: each decayed parameter additionally loses
    ``lr * weight_decay * p`` (evaluated before the update). Keys listed in
    ``no_decay`` are only moved by the Adam term.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            bad = np.argwhere(~np.isfinite(g))[0]
            raise NonFiniteError(f"non-finite gradient for {name!r} at index {tuple(bad)}")
        if g.shape != params[name].shape or state.m[name].shape != g.shape:
            raise ShapeError(f"gradient/moment shape mismatch for {name!r}")

    state.t += 1
    t = state.t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    no_decay = set(no_decay)
    for name, g in grads.items():
        p = params[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        step = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        if weight_decay and name not in no_decay:
            step = step + lr * weight_decay * p
        p -= step
    return params, state
