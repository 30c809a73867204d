"""``AADM`` model checkpoints: config block plus tagged parameter arrays."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .. import _binio
from ..exceptions import AADError, FormatError
from .config import ModelConfig
from .network import ModelParams, param_shapes

MAGIC = b"AADM"
VERSION = 1
CONFIG_FIELDS = tuple(f.name for f in dataclasses.fields(ModelConfig))
_NORMS = ("bn1", "bn2", "bn3a", "bn3b")


def _array_names():
    full = ModelConfig(bn3_both=False)
    names = list(param_shapes(full)) + list(param_shapes(ModelConfig()))
    names += [f"{bn}.{s}" for bn in _NORMS for s in ("running_mean", "running_var")]
    return tuple(dict.fromkeys(names))


ARRAY_NAMES = _array_names()
ARRAY_IDS = {name: i for i, name in enumerate(ARRAY_NAMES)}


def encode_config(config):
    return [float(getattr(config, name)) for name in CONFIG_FIELDS]


def decode_config(values):
    if len(values) != len(CONFIG_FIELDS):
        raise FormatError(f"config block has {len(values)} values, expected {len(CONFIG_FIELDS)}")
    kwargs = {}
    for f, v in zip(dataclasses.fields(ModelConfig), values):
        if f.type in ("int", "bool"):
            if not np.isfinite(v) or v != int(v):
                raise FormatError(f"config field {f.name} must be integral, got {v}")
            kwargs[f.name] = bool(v) if f.type == "bool" else int(v)
        else:
            kwargs[f.name] = float(v)
    try:
        return ModelConfig(**kwargs)
    except AADError as exc:
        raise FormatError(f"config block is not a valid model config: {exc}") from None


def encode_model(params):
    arrays = [(ARRAY_IDS[k], v) for k, v in params.weights.items()]
    arrays += [(ARRAY_IDS[k], v) for k, v in params.buffers.items()]
    return _binio.pack(MAGIC, VERSION, encode_config(params.config), arrays)


def decode_model(buf):
    values, arrays = _binio.unpack(buf, MAGIC, VERSION)
    config = decode_config(values)
    shapes = param_shapes(config)
    weights, buffers = {}, {}
    for tag, arr in arrays:
        if tag >= len(ARRAY_NAMES):
            raise FormatError(f"unknown array id {tag}")
        name = ARRAY_NAMES[tag]
        if name in weights or name in buffers:
            raise FormatError(f"duplicate array {name}")
        if name.endswith(("running_mean", "running_var")):
            buffers[name] = arr
        else:
            weights[name] = arr
    if set(weights) != set(shapes):
        missing = sorted(set(shapes) - set(weights))
        extra = sorted(set(weights) - set(shapes))
        raise FormatError(f"parameter set mismatch: missing {missing}, unexpected {extra}")
    for name, shape in shapes.items():
        if weights[name].shape != tuple(shape):
            raise FormatError(f"{name} has shape {weights[name].shape}, config implies {shape}")
    expected_buffers = {f"{n.split('.')[0]}.{s}" for n in shapes if n.endswith(".gamma")
                        for s in ("running_mean", "running_var")}
    if set(buffers) != expected_buffers:
        raise FormatError("running-statistics buffers do not match the active norms")
    ordered = {k: weights[k] for k in shapes}
    return ModelParams(config, ordered, dict(sorted(buffers.items())))


def save_model(params, path):
    path = Path(path)
    path.write_bytes(encode_model(params))
    return path


def load_model(path):
    return decode_model(Path(path).read_bytes())
