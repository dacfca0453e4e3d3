"""Dense linear algebra shared by the inference code.

Eigenvectors and right singular vectors follow one sign convention: the
first coordinate with ``|value| > SIGN_TOL`` is positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BadShape, NonFinite, NotSymmetric, RankDeficient

RANK_TOL = 1e-10
SIGN_TOL = 1e-12
TIE_TOL = 1e-10
SYM_TOL = 1e-10


@dataclass(frozen=True)
class DataMatrix:
    """Full data: an ``n x p`` design ``X`` and optional response ``y``."""

    X: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise BadShape(f"X must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if p < 1 or n < p:
            raise BadShape(f"need n >= p >= 1, got n={n}, p={p}")
        if not np.all(np.isfinite(X)):
            raise NonFinite("X contains NaN or Inf")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.array(self.y, dtype=np.float64).reshape(-1)
            if y.shape[0] != n:
                raise BadShape(f"y has length {y.shape[0]}, expected {n}")
            if not np.all(np.isfinite(y)):
                raise NonFinite("y contains NaN or Inf")
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class ThinSvd:
    U: np.ndarray
    L: np.ndarray
    V: np.ndarray
    ties: tuple = ()


@dataclass(frozen=True)
class EigenDecomposition:
    lambdas: np.ndarray
    vectors: np.ndarray  # columns are eigenvectors
    ties: tuple = ()


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, DataMatrix):
        return X.X
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise BadShape(f"expected a 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite("matrix contains NaN or Inf")
    return A


def sign_normalize(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the first coordinate with ``|v| > SIGN_TOL`` is positive."""
    V = np.array(vectors, dtype=np.float64, copy=True)
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > SIGN_TOL)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def _find_ties(vals: np.ndarray, scale: float) -> tuple:
    if vals.size < 2 or scale <= 0:
        return ()
    gaps = np.abs(np.diff(vals))
    return tuple(int(i) for i in np.flatnonzero(gaps <= TIE_TOL * scale))


def thin_svd(X) -> ThinSvd:
    """Thin SVD ``X = U diag(L) V^T`` with descending ``L`` and sign-normalised
    ``V`` (``U`` is flipped alongside). Near-equal singular values are
    reported in ``ties`` rather than perturbed."""
    A = _as_matrix(X)
    n, p = A.shape
    if n < p:
        raise BadShape(f"thin_svd needs n >= p, got {A.shape}")
    U, L, Vt = np.linalg.svd(A, full_matrices=False)
    if L[0] == 0.0 or L[-1] <= RANK_TOL * L[0]:
        raise RankDeficient(f"smallest singular value {L[-1]:.3e} <= {RANK_TOL} * {L[0]:.3e}")
    V = Vt.T
    Vn = sign_normalize(V)
    flip = np.where(np.sum(Vn * V, axis=0) < 0, -1.0, 1.0)
    return ThinSvd(U=U * flip, L=L, V=Vn, ties=_find_ties(L, L[0]))


def sym_eig(A) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    M = _as_matrix(A)
    if M.shape[0] != M.shape[1]:
        raise BadShape(f"sym_eig needs a square matrix, got {M.shape}")
    scale = max(np.max(np.abs(M)), np.finfo(float).tiny)
    if np.max(np.abs(M - M.T)) > SYM_TOL * scale:
        raise NotSymmetric("matrix is not symmetric to 1e-10 relative")
    # symmetrise so A and (A + A^T)/2 give bit-identical output
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    order = np.argsort(w, kind="stable")[::-1]
    w = w[order]
    V = sign_normalize(V[:, order])
    return EigenDecomposition(lambdas=w, vectors=V, ties=_find_ties(w, abs(w[0])))


def check_full_rank(X, tol: float = RANK_TOL) -> np.ndarray:
    """Return singular values of ``X``; raise :class:`RankDeficient` if
    ``l_p <= tol * l_1``."""
    A = _as_matrix(X)
    if A.shape[0] < A.shape[1]:
        raise RankDeficient(f"{A.shape[0]} rows cannot have rank {A.shape[1]}")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= tol * s[0]:
        raise RankDeficient(f"matrix is rank deficient (l_min/l_max = {s[-1] / max(s[0], 1e-300):.3e})")
    return s


def solve_ls(X, y=None) -> np.ndarray:
    """Least-squares coefficients ``argmin ||y - X b||`` for full-rank ``X``."""
    if isinstance(X, DataMatrix):
        if y is None:
            y = X.y
        X = X.X
    A = _as_matrix(X)
    if y is None:
        raise BadShape("solve_ls needs a response vector")
    b = np.asarray(y, dtype=np.float64).reshape(-1)
    if b.shape[0] != A.shape[0]:
        raise BadShape("X and y have different row counts")
    check_full_rank(A)
    # QR is backward stable; rank was checked above
    Q, R = np.linalg.qr(A)
    return np.linalg.solve(R, Q.T @ b)


def gram_solve(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``G x = rhs`` for a symmetric positive-definite Gram matrix."""
    try:
        c = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient("Gram matrix is not positive definite") from exc
    z = np.linalg.solve(c, rhs)
    return np.linalg.solve(c.T, z)


def gram_inverse(G: np.ndarray) -> np.ndarray:
    inv = gram_solve(G, np.eye(G.shape[0]))
    return 0.5 * (inv + inv.T)
