"""Sketched PCA with eigenvalue and eigenvector confidence intervals.

Indices ``i`` are 0-based here (the CLI and experiment configs use 1-based
targets). Eigenvalues are in descending order and eigenvectors follow the
first-nonzero-coordinate-positive sign convention.

The covariance of the vectorised quadratic form ``U^T S^T S U - I`` is
described by a :class:`GForm`; its ``(ik),(il)`` entries feed
:func:`delta_i`, the eigenvector covariance functional.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (
    BadShape,
    DegenerateDirection,
    EigengapTooSmall,
    NeedsFullData,
    NotOrthonormal,
    RankDeficient,
    UnsupportedMethod,
)
from .linalg import check_full_rank, sym_eig
from .sketch import SketchOutput
from .stats import z_two_sided

MIN_REL_GAP = 1e-8
ORTHO_TOL = 1e-8


# ---------------------------------------------------------------------------
# G forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Isotropic:
    """``G = I + P + alpha Q``."""

    alpha: int = 0


@dataclass(frozen=True)
class Kurtosis:
    """``G = I + P + Gamma`` with ``Gamma`` from :func:`gamma_kurtosis`."""

    gamma: np.ndarray


@dataclass(frozen=True)
class Explicit:
    """A dense, absolutely symmetric ``p^2 x p^2`` matrix."""

    g: np.ndarray


GForm = Union[Isotropic, Kurtosis, Explicit]


def commutation_matrix(p: int) -> np.ndarray:
    """``P_p``: maps ``vec(A)`` to ``vec(A^T)`` (row-major pair index ``i*p + j``)."""
    P = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            P[i * p + j, j * p + i] = 1.0
    return P


def vec_identity_outer(p: int) -> np.ndarray:
    """``Q_p = vec(I) vec(I)^T``."""
    v = np.eye(p).reshape(-1)
    return np.outer(v, v)


def g_matrix(form: GForm, p: int) -> np.ndarray:
    if isinstance(form, Explicit):
        return np.asarray(form.g, dtype=np.float64)
    base = np.eye(p * p) + commutation_matrix(p)
    if isinstance(form, Isotropic):
        return base + form.alpha * vec_identity_outer(p)
    return base + np.asarray(form.gamma, dtype=np.float64)


def is_absolutely_symmetric(g: np.ndarray, p: int, tol: float = 1e-12) -> bool:
    G4 = np.asarray(g).reshape(p, p, p, p)
    scale = max(np.max(np.abs(G4)), 1.0)
    return bool(
        np.max(np.abs(G4 - G4.transpose(1, 0, 2, 3))) <= tol * scale
        and np.max(np.abs(G4 - G4.transpose(0, 1, 3, 2))) <= tol * scale
    )


def _check_orthonormal(U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise BadShape("U must be 2-D")
    p = U.shape[1]
    if np.max(np.abs(U.T @ U - np.eye(p))) > ORTHO_TOL:
        raise NotOrthonormal("U^T U differs from the identity by more than 1e-8")
    return U


def _fourth_moment(U: np.ndarray) -> np.ndarray:
    n, p = U.shape
    K = (U[:, :, None] * U[:, None, :]).reshape(n, p * p)
    return K.T @ K


def gamma_kurtosis(U, kappa4: float) -> np.ndarray:
    """Kurtosis correction ``(kappa4 - 3) sum_h U_h,k1 U_h,k2 U_h,k3 U_h,k4``."""
    U = _check_orthonormal(U)
    return (float(kappa4) - 3.0) * _fourth_moment(U)


def subsample_g(U) -> np.ndarray:
    """``n sum_h (u_h u_h^T) kron (u_h u_h^T)`` over the rows ``u_h`` of ``U``."""
    U = _check_orthonormal(U)
    return U.shape[0] * _fourth_moment(U)


# ---------------------------------------------------------------------------
# Delta_i
# ---------------------------------------------------------------------------

def _check_gap(lambdas: np.ndarray, i: int, min_gap: float):
    others = np.delete(lambdas, i)
    if others.size == 0:
        return
    scale = max(abs(lambdas[0]), np.finfo(float).tiny)
    gap = np.min(np.abs(lambdas[i] - others)) / scale
    if gap <= min_gap:
        raise EigengapTooSmall(f"relative eigengap {gap:.3e} at index {i} is below {min_gap:g}")


def delta_i(lambdas, vectors, G: GForm, i: int, min_gap: float = MIN_REL_GAP) -> np.ndarray:
    """Eigenvector covariance functional for the ``i``-th eigenpair.

    ``sum_{k,l != i} lam_i sqrt(lam_k lam_l) / ((lam_i - lam_k)(lam_i - lam_l))
    G[(ik),(il)] v_k v_l^T``. For an isotropic form the ``G`` entries reduce to
    ``delta_kl`` and only the diagonal terms survive.
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    V = np.asarray(vectors, dtype=np.float64)
    p = lam.shape[0]
    if not (0 <= i < p):
        raise IndexError(f"eigen index {i} out of range for p={p}")
    if np.any(lam <= 0):
        raise RankDeficient("delta_i needs positive eigenvalues")
    _check_gap(lam, i, min_gap)
    idx = np.array([k for k in range(p) if k != i], dtype=int)
    w = np.sqrt(lam[i] * lam[idx]) / (lam[i] - lam[idx])  # sqrt(lam_i lam_k)/(lam_i - lam_k)
    Vo = V[:, idx]
    if isinstance(G, Isotropic):
        D = (Vo * (w * w)) @ Vo.T
    else:
        g = g_matrix(G, p)
        if g.shape != (p * p, p * p):
            raise BadShape(f"G must be {p * p} x {p * p}")
        block = g[np.ix_(i * p + idx, i * p + idx)]
        D = Vo @ (np.outer(w, w) * block) @ Vo.T
    return 0.5 * (D + D.T)


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaInferenceResult:
    lambdas_hat: np.ndarray
    vectors_hat: np.ndarray
    family: str
    m: int
    gamma: float
    tau: float
    variance_mode: str  # constant | subsample_sketch | subsample_oracle | iid_kurtosis
    gform: Optional[GForm] = None
    eigval_factors: Optional[np.ndarray] = None  # per-index sigma^2(T_lambda)
    vec_tau: Optional[float] = None
    level: float = 0.95
    min_gap: float = MIN_REL_GAP


def sketched_pca(sk: SketchOutput):
    """Descending eigenvalues and sign-normalised eigenvectors of ``Xs^T Xs``."""
    check_full_rank(sk.Xs)
    eig = sym_eig(sk.Xs.T @ sk.Xs)
    return eig.lambdas, eig.vectors


def pca_infer(sk: SketchOutput, U_full=None, mode: str = "auto", level: float = 0.95,
              min_gap: float = MIN_REL_GAP) -> PcaInferenceResult:
    """Sketched eigenpairs plus the variance model for their intervals.

    ``U_full`` (left singular vectors of the full data) enables the oracle
    variance modes that subsampling and non-Gaussian i.i.d. sketches need.
    ``mode`` is ``"auto"``, ``"sketch"`` or ``"oracle"``.
    """
    lam, V = sketched_pca(sk)
    p = lam.shape[0]
    common = dict(lambdas_hat=lam, vectors_hat=V, family=sk.family, m=sk.m_nominal,
                  gamma=sk.gamma, tau=sk.tau, level=level, min_gap=min_gap)
    if mode not in ("auto", "sketch", "oracle"):
        raise UnsupportedMethod(f"mode must be auto, sketch or oracle, got {mode!r}")

    if sk.family == "subsample":
        if mode == "oracle" or (mode == "auto" and U_full is not None):
            if U_full is None:
                raise NeedsFullData("oracle mode needs the full-data left singular vectors")
            G = subsample_g(U_full)
            diag = np.array([G[i * p + i, i * p + i] for i in range(p)])
            return PcaInferenceResult(**common, variance_mode="subsample_oracle", gform=Explicit(G),
                                      eigval_factors=sk.tau * diag, vec_tau=sk.tau)
        if sk.gamma < 0.05:
            warnings.warn("sketch-only subsampling intervals assume m/n bounded away from 0", stacklevel=2)
        Ut, _, _ = np.linalg.svd(sk.Xs, full_matrices=False)
        factors = sk.tau * sk.m_nominal * np.sum(Ut ** 4, axis=0)
        return PcaInferenceResult(**common, variance_mode="subsample_sketch", eigval_factors=factors)

    if sk.family == "iid" and sk.alpha is None:
        if U_full is None or mode == "sketch":
            raise NeedsFullData("non-Gaussian i.i.d. PCA intervals need U of the full data for Gamma")
        Gam = gamma_kurtosis(U_full, sk.kappa4)
        diag = np.array([Gam[i * p + i, i * p + i] for i in range(p)])
        return PcaInferenceResult(**common, variance_mode="iid_kurtosis", gform=Kurtosis(Gam),
                                  eigval_factors=2.0 + diag, vec_tau=1.0)

    if mode == "oracle":
        raise UnsupportedMethod(f"family {sk.family!r} has a data-free variance; oracle mode is not used")
    alpha = 1 if sk.family == "srht" else 0
    factors = np.full(p, sk.tau * (2.0 + alpha))
    return PcaInferenceResult(**common, variance_mode="constant", gform=Isotropic(alpha),
                              eigval_factors=factors, vec_tau=sk.tau)


def eigenvalue_ci(res: PcaInferenceResult, i: int, level: Optional[float] = None) -> np.ndarray:
    """``[L_i (1 - z sqrt(f/m)), L_i (1 + z sqrt(f/m))]``."""
    level = res.level if level is None else level
    z = z_two_sided(level)
    _check_gap(res.lambdas_hat, i, res.min_gap)
    lam = res.lambdas_hat[i]
    half = z * np.sqrt(res.eigval_factors[i] / res.m)
    return np.array([lam * (1.0 - half), lam * (1.0 + half)])


def eigenvalue_pivot(res: PcaInferenceResult, i: int, true_lambda: float) -> float:
    """``sqrt(m) L_i^{-1} (L_i - Lambda_i)``; its variance is ``eigval_factors[i]``."""
    lam = res.lambdas_hat[i]
    return float(np.sqrt(res.m) * (lam - true_lambda) / lam)


def eigenvector_variance(res: PcaInferenceResult, i: int, c) -> float:
    """``c^T Delta_i c`` from the sketched eigenpairs."""
    if res.gform is None or res.vec_tau is None:
        raise NeedsFullData(
            "eigenvector intervals for subsampling need the full-data G_n (oracle mode)"
        )
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    D = delta_i(res.lambdas_hat, res.vectors_hat, res.gform, i, res.min_gap)
    val = float(c @ D @ c)
    if val <= 1e-8 * max(float(np.trace(D)), np.finfo(float).tiny):
        raise DegenerateDirection("c is (nearly) parallel to the estimated eigenvector; the variance vanishes")
    return val


def eigenvector_ci(res: PcaInferenceResult, i: int, c, level: Optional[float] = None) -> np.ndarray:
    """``c^T v_i +- z sqrt(tau/m) sqrt(c^T Delta_i c)``."""
    level = res.level if level is None else level
    z = z_two_sided(level)
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    var = eigenvector_variance(res, i, c)
    center = float(c @ res.vectors_hat[:, i])
    half = z * np.sqrt(res.vec_tau / res.m * var)
    return np.array([center - half, center + half])


def eigenvector_pivot(res: PcaInferenceResult, i: int, c, true_vector) -> float:
    """``sqrt(m) (c^T Delta_i c)^{-1/2} c^T (v_hat - v)``; its variance is ``vec_tau``."""
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    var = eigenvector_variance(res, i, c)
    diff = float(c @ (res.vectors_hat[:, i] - np.asarray(true_vector)))
    return float(np.sqrt(res.m / var) * diff)
