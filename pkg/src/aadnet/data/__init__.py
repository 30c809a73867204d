from .manifest import (
    MANIFEST_NAME,
    DatasetManifest,
    balance_from_labels,
    class_balance,
    read_manifest,
)
from .synth import SynthSpec, generate_synthetic, synthesize
from .trial_io import decode_trial, encode_trial, load_trial, read_header, save_trial

__all__ = [
    "MANIFEST_NAME",
    "DatasetManifest",
    "SynthSpec",
    "balance_from_labels",
    "class_balance",
    "decode_trial",
    "encode_trial",
    "generate_synthetic",
    "load_trial",
    "read_header",
    "read_manifest",
    "save_trial",
    "synthesize",
]
