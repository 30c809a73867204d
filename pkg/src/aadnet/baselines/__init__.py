"""Classical comparators: filter-bank CSP and PCA, each feeding a linear SVM."""

from .checkpoint import (
    load_baseline,
    make_fbcsp_pipeline,
    make_pca_pipeline,
    save_baseline,
)
from .csp import CSP, DEFAULT_BANDS, CspModel, FilterBankCSP, fit_csp
from .eigen import jacobi_eigh
from .linear import LinearSVM, fit_linear
from .pca import PCA, PcaModel, fit_pca

__all__ = [
    "CSP",
    "DEFAULT_BANDS",
    "CspModel",
    "FilterBankCSP",
    "LinearSVM",
    "PCA",
    "PcaModel",
    "fit_csp",
    "fit_linear",
    "fit_pca",
    "jacobi_eigh",
    "load_baseline",
    "make_fbcsp_pipeline",
    "make_pca_pipeline",
    "save_baseline",
]
