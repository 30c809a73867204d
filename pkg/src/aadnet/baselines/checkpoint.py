"""``AADC`` checkpoints for the fitted baseline pipelines."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.pipeline import Pipeline

from .. import _binio
from ..exceptions import FormatError, ParameterError
from ..preprocess import FirSpec, design_fir
from .csp import DEFAULT_BANDS, CspModel, FilterBankCSP, fbcsp_taps
from .linear import LinearSVM
from .pca import PCA, PcaModel

MAGIC = b"AADC"
VERSION = 1
KIND_FBCSP = 1
KIND_PCA = 2
_CSP_FIELDS = ("filters", "eigenvalues", "cov_1", "cov_2", "whitened_1", "whitened_2")
_SVM_BASE = 1000
_PCA_BASE = 2000


# stronger than the classifier default: 30 band features on about 100 windows overfit at 1e-3
PIPELINE_LAM = 0.1


def make_fbcsp_pipeline(fs=500.0, bands=None, m=3, rho=0.05, lam=PIPELINE_LAM, epochs=30, seed=0):
    fb = FilterBankCSP(fs=fs, bands=DEFAULT_BANDS if bands is None else bands, m=m, rho=rho)
    return Pipeline([("fbcsp", fb), ("svm", LinearSVM(lam=lam, epochs=epochs, seed=seed))])


def make_pca_pipeline(q=32, lam=PIPELINE_LAM, epochs=30, seed=0):
    return Pipeline([("pca", PCA(q=q)), ("svm", LinearSVM(lam=lam, epochs=epochs, seed=seed))])


def _svm_arrays(svm):
    return [
        (_SVM_BASE, svm.mean_), (_SVM_BASE + 1, svm.scale_), (_SVM_BASE + 2, svm.coef_),
        (_SVM_BASE + 3, np.array([svm.intercept_])), (_SVM_BASE + 4, svm.loss_trace_),
    ]


def encode_baseline(pipeline):
    front, svm = pipeline.steps[0][1], pipeline.steps[-1][1]
    if not isinstance(svm, LinearSVM) or not hasattr(svm, "coef_"):
        raise FormatError("pipeline must end in a fitted LinearSVM")
    svm_cfg = [svm.lam, svm.epochs, svm.seed]
    arrays = _svm_arrays(svm)
    if isinstance(front, FilterBankCSP):
        bands = [v for mdl in front.models_ for v in mdl.band]
        cfg = [KIND_FBCSP, front.fs, front.m, front.rho, front.n_samples_, len(front.models_)]
        cfg += bands + svm_cfg
        for k, mdl in enumerate(front.models_):
            arrays += [(len(_CSP_FIELDS) * k + j, getattr(mdl, f)) for j, f in enumerate(_CSP_FIELDS)]
    elif isinstance(front, PCA):
        p = front.model_
        cfg = [KIND_PCA, front.q] + svm_cfg
        arrays += [(_PCA_BASE, p.mean), (_PCA_BASE + 1, p.components),
                   (_PCA_BASE + 2, p.eigenvalues), (_PCA_BASE + 3, np.array([p.total_variance]))]
    else:
        raise FormatError(f"unsupported baseline front end {type(front).__name__}")
    return _binio.pack(MAGIC, VERSION, cfg, arrays)


def _int(v, name):
    if not np.isfinite(v) or v != int(v) or v < 0:
        raise FormatError(f"{name} must be a non-negative integer, got {v}")
    return int(v)


def _restore_svm(cfg, table):
    lam, epochs, seed = cfg
    svm = LinearSVM(lam=float(lam), epochs=_int(epochs, "epochs"), seed=_int(seed, "seed"))
    try:
        svm.mean_, svm.scale_, svm.coef_ = (table.pop(_SVM_BASE + i) for i in range(3))
        intercept, svm.loss_trace_ = table.pop(_SVM_BASE + 3), table.pop(_SVM_BASE + 4)
    except KeyError as exc:
        raise FormatError(f"missing classifier array {exc.args[0]}") from None
    if intercept.shape != (1,) or svm.coef_.shape != svm.mean_.shape:
        raise FormatError("classifier arrays have inconsistent shapes")
    svm.intercept_ = float(intercept[0])
    svm.classes_ = np.array([0, 1])
    return svm


def decode_baseline(buf):
    cfg, arrays = _binio.unpack(buf, MAGIC, VERSION)
    table = dict(arrays)
    if len(table) != len(arrays):
        raise FormatError("duplicate array ids")
    if cfg.size < 1:
        raise FormatError("empty config block")
    kind = cfg[0]
    if kind == KIND_FBCSP:
        if cfg.size < 6:
            raise FormatError("FBCSP config block truncated")
        nb = _int(cfg[5], "band count")
        if cfg.size != 6 + 2 * nb + 3:
            raise FormatError(f"FBCSP config block has {cfg.size} values, expected {9 + 2 * nb}")
        fb = FilterBankCSP(fs=float(cfg[1]), m=_int(cfg[2], "m"), rho=float(cfg[3]))
        fb.n_samples_ = _int(cfg[4], "n_samples")
        bands = [(float(cfg[6 + 2 * k]), float(cfg[7 + 2 * k])) for k in range(nb)]
        fb.bands = tuple(bands)
        fb.models_, fb.coeffs_ = [], []
        for k, band in enumerate(bands):
            try:
                parts = {f: table.pop(len(_CSP_FIELDS) * k + j) for j, f in enumerate(_CSP_FIELDS)}
            except KeyError as exc:
                raise FormatError(f"missing CSP array {exc.args[0]}") from None
            fb.models_.append(CspModel(band=band, **parts))
            try:
                fb.coeffs_.append(design_fir(FirSpec(band[0], band[1], fbcsp_taps(fb.n_samples_)), fb.fs))
            except ParameterError as exc:
                raise FormatError(f"stored band {band} is not valid: {exc}") from None
        fb.n_features_out_ = 2 * fb.m * nb
        front, name = fb, "fbcsp"
        svm_cfg = cfg[6 + 2 * nb:]
    elif kind == KIND_PCA:
        if cfg.size != 5:
            raise FormatError(f"PCA config block has {cfg.size} values, expected 5")
        front = PCA(q=_int(cfg[1], "q"))
        try:
            mean, comps, vals, total = (table.pop(_PCA_BASE + i) for i in range(4))
        except KeyError as exc:
            raise FormatError(f"missing PCA array {exc.args[0]}") from None
        front.model_ = PcaModel(mean, comps, vals, float(total.reshape(-1)[0]))
        name, svm_cfg = "pca", cfg[2:]
    else:
        raise FormatError(f"unknown baseline kind {kind}")
    svm = _restore_svm(svm_cfg, table)
    if table:
        raise FormatError(f"unexpected array ids {sorted(table)}")
    return Pipeline([(name, front), ("svm", svm)])


def save_baseline(pipeline, path):
    path = Path(path)
    path.write_bytes(encode_baseline(pipeline))
    return path


def load_baseline(path):
    return decode_baseline(Path(path).read_bytes())
