"""Synthetic designs for the simulation cases and unit-vector pairs for the
quadratic-form experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BadShape
from .linalg import DataMatrix
from .rng import stream


@dataclass(frozen=True)
class CaseConfig:
    case: int
    n: int
    p: int
    seed: int
    t: float = 0.1
    noise_sd: float = 0.01

    def generate(self) -> DataMatrix:
        if self.case == 1:
            return gen_case1(self.n, self.p, self.seed)
        if self.case == 2:
            return gen_case2(self.n, self.p, self.seed, t=self.t, noise_sd=self.noise_sd)
        if self.case == 3:
            return gen_case3(self.n, self.p, self.seed)
        raise BadShape(f"unknown case {self.case}")


def haar_orthonormal(gen: np.random.Generator, n: int, p: int) -> np.ndarray:
    """Uniform ``n x p`` matrix with orthonormal columns (QR with sign fix)."""
    Q, R = np.linalg.qr(gen.standard_normal((n, p)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def _check_np(n: int, p: int):
    if p < 1 or n < p:
        raise BadShape(f"need n >= p >= 1, got n={n}, p={p}")


def gen_case1(n: int, p: int, seed: int) -> DataMatrix:
    """``X = U diag(1, 1/2, ..., 1/p) V^T`` with Haar ``U`` and ``V``;
    ``y`` has i.i.d. Uniform(0, 1) entries."""
    _check_np(n, p)
    gen = stream(seed, "case1")
    U = haar_orthonormal(gen, n, p)
    V = haar_orthonormal(gen, p, p)
    L = 1.0 / np.arange(1, p + 1)
    X = (U * L) @ V.T
    y = stream(seed, "case1", "y").random(n)
    return DataMatrix(X, y)


def case2_coefficients(p: int, t: float = 0.1) -> np.ndarray:
    if p % 5:
        raise BadShape(f"case 2 needs 0.2*p to be an integer, got p={p}")
    k = p // 5
    return np.concatenate([np.ones(k), t * np.ones(3 * k), np.ones(k)])


def gen_case2(n: int, p: int, seed: int, t: float = 0.1, noise_sd: float = 0.01) -> DataMatrix:
    """Left singular vectors of a matrix with multivariate ``t_2(0, C)`` rows,
    ``C_ij = 2 * 0.5**|i-j|``; singular values equally spaced on [0.1, 1];
    ``y = X b + noise``."""
    _check_np(n, p)
    b = case2_coefficients(p, t)
    gen = stream(seed, "case2")
    idx = np.arange(p)
    C = 2.0 * 0.5 ** np.abs(idx[:, None] - idx[None, :])
    Z = gen.standard_normal((n, p)) @ np.linalg.cholesky(C).T
    w = gen.chisquare(2, size=n) / 2.0
    A = Z / np.sqrt(w)[:, None]
    U, _, _ = np.linalg.svd(A, full_matrices=False)
    _, _, Vt = np.linalg.svd(gen.standard_normal((p, p)))
    L = np.linspace(1.0, 0.1, p)
    X = (U * L) @ Vt
    y = X @ b
    if noise_sd:
        y = y + noise_sd * stream(seed, "case2", "noise").standard_normal(n)
    return DataMatrix(X, y)


def gen_case3(n: int, p: int, seed: int) -> DataMatrix:
    """Gaussian columns with mean 0 on the first ``ceil(n/2)`` rows and mean 5
    on the rest, then each column standardised (population variance 1)."""
    _check_np(n, p)
    gen = stream(seed, "case3")
    X = gen.standard_normal((n, p))
    X[(n + 1) // 2:] += 5.0
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    y = stream(seed, "case3", "y").random(n)
    return DataMatrix(X, y)


def gen_unit_pair(style: str, n: int, seed: Optional[int] = None, theta: Optional[float] = None):
    """Two unit vectors ``(a, a2)`` in ``R^n``.

    ``style``: ``"delocalized"`` (random directions with ``a2`` orthogonal to
    ``a``), ``"delocalized_same"`` (``a2 = a``), ``"flat"`` (both equal to
    ``n**-0.5 * ones``), ``"localized"`` (both ``e_1``), ``"angle"`` (random
    pair with inner product exactly ``cos(theta)``) and ``"srht_counter"``
    (the 4-sparse +-1/2 pair on which SRHT statistics have an atom at zero).
    """
    if n < 2:
        raise BadShape("need n >= 2")
    if style == "localized":
        e = np.zeros(n)
        e[0] = 1.0
        return e, e.copy()
    if style == "flat":
        a = np.full(n, n ** -0.5)
        return a, a.copy()
    if style == "srht_counter":
        if n < 4:
            raise BadShape("the counterexample needs n >= 4")
        a = np.zeros(n)
        b = np.zeros(n)
        a[:4] = [0.5, 0.5, -0.5, -0.5]
        b[:4] = [-0.5, 0.5, -0.5, 0.5]
        return a, b
    gen = stream(0 if seed is None else seed, "unit_pair")
    Q = haar_orthonormal(gen, n, 2)
    a, u = Q[:, 0], Q[:, 1]
    if style == "delocalized":
        return a, u
    if style == "delocalized_same":
        return a, a.copy()
    if style == "angle":
        if theta is None:
            raise BadShape("angle style needs theta")
        return a, np.cos(theta) * a + np.sin(theta) * u
    raise BadShape(f"unknown pair style {style!r}")


def max_leverage(X) -> float:
    A = X.X if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    U, _, _ = np.linalg.svd(A, full_matrices=False)
    return float(np.max(np.linalg.norm(U, axis=1)))
