"""Sketched least squares: point estimates, covariance estimates and
confidence intervals.

Routing by family (``ls_infer`` with ``estimator="auto"``):

=================  ===========================================
srht               simple covariance, alpha = 1
sse / countsketch  simple covariance, alpha = 0
haar               simple covariance, alpha = 0
iid Gaussian       simple covariance (sandwich also available)
iid non-Gaussian   sandwich, scale 1/m
subsample          sandwich, scale (1 - gamma)/m
=================  ===========================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as sps

from .errors import (
    BadShape,
    DegenerateSignal,
    RankDeficient,
    UnsupportedMethod,
    ZeroResidual,
)
from .linalg import check_full_rank, gram_inverse, gram_solve
from .sketch import SketchOutput
from .stats import z_two_sided


@dataclass(frozen=True)
class LsInferenceResult:
    kind: str  # "complete" or "partial"
    beta_hat: np.ndarray
    sigma_hat: np.ndarray  # covariance before the scale factor
    scale: float
    gamma: float
    tau: float
    family: str
    level: float = 0.95
    estimator: str = "simple"

    @property
    def cov(self) -> np.ndarray:
        return self.scale * self.sigma_hat

    def cis(self, level: Optional[float] = None) -> np.ndarray:
        return ls_confidence_intervals(self, self.level if level is None else level)


def _gram(sk: SketchOutput) -> np.ndarray:
    check_full_rank(sk.Xs)
    G = sk.Xs.T @ sk.Xs
    return 0.5 * (G + G.T)


def sketch_and_solve(sk: SketchOutput) -> np.ndarray:
    """Complete sketching: ``(Xs^T Xs)^{-1} Xs^T ys``."""
    if sk.ys is None:
        raise BadShape("sketch-and-solve needs the sketched response")
    check_full_rank(sk.Xs)
    Q, R = np.linalg.qr(sk.Xs)
    return np.linalg.solve(R, Q.T @ sk.ys)


def partial_sketch_solve(sk: SketchOutput, xty) -> np.ndarray:
    """Partial sketching: ``(Xs^T Xs)^{-1} X^T y`` with ``X^T y`` from the
    full data."""
    xty = np.asarray(xty, dtype=np.float64).reshape(-1)
    if xty.shape[0] != sk.p:
        raise BadShape(f"X^T y has length {xty.shape[0]}, expected {sk.p}")
    return gram_solve(_gram(sk), xty)


def ls_cov_simple(sk: SketchOutput, beta_hat) -> np.ndarray:
    """``||ys - Xs b||^2 (Xs^T Xs)^{-1}``; use with scale ``tau/m``."""
    if sk.ys is None:
        raise BadShape("complete-sketch covariance needs the sketched response")
    resid = sk.ys - sk.Xs @ np.asarray(beta_hat)
    rss = float(resid @ resid)
    if rss <= 1e-28 * max(float(sk.ys @ sk.ys), 1e-300):
        raise ZeroResidual("sketched residual is zero; the fit interpolates and intervals would be empty")
    return rss * gram_inverse(_gram(sk))


def ls_cov_partial(sk: SketchOutput, beta_hat_p) -> np.ndarray:
    """``||Xs b||^2 (Xs^T Xs)^{-1} + (alpha + 1) b b^T``; use with ``tau/m``."""
    if sk.alpha is None:
        raise UnsupportedMethod(f"family {sk.family!r} has no isotropic partial covariance; use the sandwich")
    b = np.asarray(beta_hat_p, dtype=np.float64)
    if not np.any(b):
        raise DegenerateSignal("partial estimate is zero; the covariance degenerates")
    fit = sk.Xs @ b
    S = float(fit @ fit) * gram_inverse(_gram(sk)) + (sk.alpha + 1) * np.outer(b, b)
    return 0.5 * (S + S.T)


def ls_cov_sandwich(sk: SketchOutput, r, mode: str = "complete") -> np.ndarray:
    """``m (Xs^T Xs)^{-1} Xs^T diag(r*r) Xs (Xs^T Xs)^{-1}``.

    ``r`` is the sketched residual (complete) or ``Xs b_p`` (partial). Pair
    with :func:`sandwich_scale`.
    """
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    if r.shape[0] != sk.Xs.shape[0]:
        raise BadShape("r must have one entry per sketched row")
    if mode == "complete":
        if float(r @ r) == 0.0:
            raise ZeroResidual("sketched residual is zero")
    elif mode == "partial":
        if not np.any(r):
            raise DegenerateSignal("sketched fit is zero")
    else:
        raise UnsupportedMethod(f"mode must be 'complete' or 'partial', got {mode!r}")
    Ginv = gram_inverse(_gram(sk))
    Xr = sk.Xs * r[:, None]
    S = sk.m_nominal * (Ginv @ (Xr.T @ Xr) @ Ginv)
    return 0.5 * (S + S.T)


def simple_scale(sk: SketchOutput) -> float:
    return sk.tau / sk.m_nominal


def sandwich_scale(sk: SketchOutput) -> float:
    if sk.family == "subsample":
        return (1.0 - sk.gamma) / sk.m_nominal
    return 1.0 / sk.m_nominal


def default_estimator(sk: SketchOutput) -> str:
    return "sandwich" if sk.sandwich_only else "simple"


def ls_infer(sk: SketchOutput, kind: str = "complete", xty=None, level: float = 0.95,
             estimator: str = "auto") -> LsInferenceResult:
    """Estimate and covariance for complete or partial sketching, routed by
    family unless ``estimator`` is ``"simple"`` or ``"sandwich"``."""
    if estimator == "auto":
        estimator = default_estimator(sk)
    if estimator == "simple" and sk.sandwich_only:
        raise UnsupportedMethod(f"family {sk.family!r} supports only the sandwich estimator")
    if estimator == "sandwich" and sk.family not in ("iid", "subsample"):
        raise UnsupportedMethod("the sandwich estimator applies to iid and subsampling sketches")
    if kind == "complete":
        beta = sketch_and_solve(sk)
        if estimator == "simple":
            sigma, scale = ls_cov_simple(sk, beta), simple_scale(sk)
        else:
            sigma, scale = ls_cov_sandwich(sk, sk.ys - sk.Xs @ beta, "complete"), sandwich_scale(sk)
    elif kind == "partial":
        if xty is None:
            raise BadShape("partial sketching needs X^T y from the full data")
        beta = partial_sketch_solve(sk, xty)
        if estimator == "simple":
            sigma, scale = ls_cov_partial(sk, beta), simple_scale(sk)
        else:
            sigma, scale = ls_cov_sandwich(sk, sk.Xs @ beta, "partial"), sandwich_scale(sk)
    else:
        raise UnsupportedMethod(f"kind must be 'complete' or 'partial', got {kind!r}")
    if np.linalg.eigvalsh(sigma)[0] <= 0:
        raise RankDeficient("covariance estimate is not positive definite")
    return LsInferenceResult(kind, beta, sigma, scale, sk.gamma, sk.tau, sk.family, level, estimator)


def ls_confidence_intervals(res: LsInferenceResult, level: float = 0.95, c=None) -> np.ndarray:
    """Intervals ``b_j +- z sqrt(scale * Sigma_jj)``, shape ``(p, 2)``; or a
    single ``(2,)`` interval for ``c^T beta`` when ``c`` is given."""
    z = z_two_sided(level)
    if c is None:
        half = z * np.sqrt(res.scale * np.diag(res.sigma_hat))
        return np.column_stack([res.beta_hat - half, res.beta_hat + half])
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    center = float(c @ res.beta_hat)
    half = z * np.sqrt(res.scale * float(c @ res.sigma_hat @ c))
    return np.array([center - half, center + half])


def ls_confidence_region_contains(res: LsInferenceResult, beta, level: float = 0.95) -> bool:
    """Joint ellipsoid ``(b - beta)^T (scale Sigma)^{-1} (b - beta) <= chi2_p(level)``."""
    d = res.beta_hat - np.asarray(beta, dtype=np.float64)
    stat = float(d @ gram_solve(res.cov, d))
    return stat <= sps.chi2.ppf(level, d.shape[0])
