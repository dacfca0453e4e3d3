"""Randomized sketching operators and data-conditional inference for
sketched least squares and sketched PCA."""

__version__ = "0.1.0"

from ._accel import get_backend, set_backend
from .errors import SketchInfError
from .kernels import fwht
from .linalg import DataMatrix, EigenDecomposition, ThinSvd, solve_ls, sym_eig, thin_svd
from .ls import (
    LsInferenceResult,
    ls_confidence_intervals,
    ls_cov_partial,
    ls_cov_sandwich,
    ls_cov_simple,
    ls_infer,
    partial_sketch_solve,
    sketch_and_solve,
)
from .pca import (
    Explicit,
    Isotropic,
    Kurtosis,
    PcaInferenceResult,
    delta_i,
    eigenvalue_ci,
    eigenvector_ci,
    gamma_kurtosis,
    pca_infer,
    sketched_pca,
    subsample_g,
)
from .sketch import (
    IidDist,
    SketchOutput,
    SketchSpec,
    apply_haar,
    apply_iid,
    apply_sketch,
    apply_srht,
    apply_sse,
    apply_uniform_subsample,
    method_constants,
)
from .stats import clopper_pearson, ks_statistic, normal_quantile

__all__ = [
    "DataMatrix", "EigenDecomposition", "Explicit", "IidDist", "Isotropic", "Kurtosis",
    "LsInferenceResult", "PcaInferenceResult", "SketchInfError", "SketchOutput", "SketchSpec", "ThinSvd",
    "apply_haar", "apply_iid", "apply_sketch", "apply_srht", "apply_sse", "apply_uniform_subsample",
    "clopper_pearson", "delta_i", "eigenvalue_ci", "eigenvector_ci", "fwht", "gamma_kurtosis",
    "get_backend", "ks_statistic", "ls_confidence_intervals", "ls_cov_partial", "ls_cov_sandwich",
    "ls_cov_simple", "ls_infer", "method_constants", "normal_quantile", "partial_sketch_solve",
    "pca_infer", "set_backend", "sketch_and_solve", "sketched_pca", "solve_ls", "subsample_g",
    "sym_eig", "thin_svd",
]
