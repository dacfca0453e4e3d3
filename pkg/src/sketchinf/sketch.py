"""Sketching operators.

Five families are supported: subsampled randomized Hadamard transform
(``srht``), sparse sign embeddings (``sse``; CountSketch is ``zeta=1``),
i.i.d. entries (``iid``), Haar partial-orthogonal (``haar``) and uniform
Bernoulli row subsampling (``subsample``). Every ``apply_*`` function sketches
``X`` and, when given, ``y`` with the *same* draw of ``S`` and returns a
:class:`SketchOutput` carrying the constants needed downstream.

Gaussian and Haar sketches additionally offer ``method="gram"``: an exact
sampler for the joint law of ``S [X y]`` that never forms ``S``. Both
families are invariant under left rotations, so ``S Z`` equals ``Q C`` in law
where ``Q`` is a uniform ``m x q`` frame and ``C^T C`` has the law of
``Z^T S^T S Z``. This costs ``O(n q^2)`` instead of ``O(m n q)`` or worse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import (
    BadShape,
    BadSparsity,
    ConfigInvalid,
    DegenerateSample,
    KurtosisTooLow,
    NonFinite,
    SketchTooLarge,
    SketchTooSmall,
    UnsupportedMethod,
)
from .linalg import DataMatrix
from .rng import stream

FAMILIES = ("srht", "sse", "iid", "haar", "subsample")
KURTOSIS_FLOOR = 1.05
HAAR_SV_FLOOR = 1e-12


@dataclass(frozen=True)
class IidDist:
    """Entry law for i.i.d. sketches: mean 0, variance 1, declared kurtosis.

    ``sampler(gen, size)`` draws standardized entries. The kurtosis is taken
    as declared and never estimated.
    """

    name: str
    kappa4: float
    sampler: Callable = field(repr=False, compare=False)

    @property
    def is_gaussian(self) -> bool:
        return self.name == "gaussian"

    @classmethod
    def gaussian(cls) -> "IidDist":
        return cls("gaussian", 3.0, lambda g, size: g.standard_normal(size))

    @classmethod
    def rademacher(cls) -> "IidDist":
        return cls("rademacher", 1.0, lambda g, size: 2.0 * g.integers(0, 2, size=size) - 1.0)

    @classmethod
    def scaled_t(cls, df: float) -> "IidDist":
        """Student t rescaled to unit variance (needs ``df > 4``)."""
        if df <= 4:
            raise ConfigInvalid("scaled t needs df > 4 for a finite kurtosis")
        k4 = 3.0 + 6.0 / (df - 4.0)
        s = math.sqrt((df - 2.0) / df)
        return cls(f"t{df:g}", k4, lambda g, size: s * g.standard_t(df, size=size))

    @classmethod
    def from_ppf(cls, name: str, ppf: Callable, kappa4: float) -> "IidDist":
        """Wrap an inverse CDF of a standardized law."""
        return cls(name, float(kappa4), lambda g, size: np.asarray(ppf(g.random(size)), dtype=np.float64))


@dataclass(frozen=True)
class SketchSpec:
    family: str
    m: int
    seed: int
    zeta: int = 1
    dist: Optional[IidDist] = None
    method: str = "explicit"

    def __post_init__(self):
        fam = self.family.lower()
        if fam == "countsketch":
            fam = "sse"
            object.__setattr__(self, "zeta", 1)
        if fam not in FAMILIES:
            raise ConfigInvalid(f"unknown sketch family {self.family!r}; allowed: {', '.join(FAMILIES)}")
        object.__setattr__(self, "family", fam)
        if fam == "iid" and self.dist is None:
            object.__setattr__(self, "dist", IidDist.gaussian())
        if self.method not in ("explicit", "gram"):
            raise UnsupportedMethod(f"unknown method {self.method!r}")

    @property
    def label(self) -> str:
        if self.family == "sse":
            return "countsketch" if self.zeta == 1 else f"sse{self.zeta}"
        if self.family == "iid":
            return "iid_" + self.dist.name
        return self.family


@dataclass(frozen=True)
class SketchOutput:
    Xs: np.ndarray
    ys: Optional[np.ndarray]
    m_nominal: int
    m_eff: int
    n: int
    gamma: float
    tau: float
    alpha: Optional[int]
    family: str
    kappa4: Optional[float] = None
    info: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def p(self) -> int:
        return self.Xs.shape[1]

    @property
    def sandwich_only(self) -> bool:
        return self.alpha is None


class MethodConstants(NamedTuple):
    tau: float
    alpha: Optional[int]
    eigval_factor: Optional[float]
    eigvec_factor: Optional[float]


def method_constants(spec: SketchSpec, m: int, n: int) -> MethodConstants:
    """Variance deflation ``tau``, partial-sketching constant ``alpha`` and the
    PCA variance factors for eigenvalue and eigenvector pivots.

    ``None`` marks a data-dependent constant (``alpha`` for sandwich-only
    families, PCA factors for subsampling and non-Gaussian i.i.d.).
    """
    gamma = m / n
    fam = spec.family
    if fam == "srht":
        tau = 1.0 - m / kernels.next_pow2(n)
        return MethodConstants(tau, 1, 3.0 * tau, tau)
    if fam == "sse":
        return MethodConstants(1.0, 0, 2.0, 1.0)
    if fam == "iid":
        if spec.dist.is_gaussian:
            return MethodConstants(1.0, 0, 2.0, 1.0)
        return MethodConstants(1.0, None, None, None)
    if fam == "haar":
        return MethodConstants(1.0 - gamma, 0, 2.0 * (1.0 - gamma), 1.0 - gamma)
    return MethodConstants(1.0 - gamma, None, None, None)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _inputs(X, y):
    """Validated ``(A, y)`` as float64 arrays (``y`` may be ``None``)."""
    if isinstance(X, DataMatrix):
        if y is None:
            y = X.y
        X = X.X
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise BadShape("X must be 2-D")
    # the sum is finite whenever every entry is; scan only on a non-finite sum
    if not np.isfinite(A.sum()) and not np.all(np.isfinite(A)):
        raise NonFinite("X contains NaN or Inf")
    if y is None:
        return A, None
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if yv.shape[0] != A.shape[0]:
        raise BadShape("y length does not match X")
    if not np.all(np.isfinite(yv)):
        raise NonFinite("y contains NaN or Inf")
    return A, yv


def _stack(X, y):
    A, yv = _inputs(X, y)
    if yv is None:
        return np.ascontiguousarray(A), None
    return np.ascontiguousarray(np.column_stack([A, yv])), yv


def _check_m(m: int, n: int, p: int):
    if m < p:
        raise SketchTooSmall(f"sketch size m={m} is below p={p}")
    if m >= n:
        raise SketchTooLarge(f"sketch size m={m} must be < n={n}")


def _split(Z: np.ndarray, has_y: bool):
    if has_y:
        return np.ascontiguousarray(Z[:, :-1]), np.ascontiguousarray(Z[:, -1])
    return Z, None


def _haar_frame(gen: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Uniform ``rows x cols`` matrix with orthonormal columns."""
    G = gen.standard_normal((rows, cols))
    Q, R = np.linalg.qr(G)
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def _sym_sqrt(A: np.ndarray, inverse: bool = False) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    w = np.clip(w, 0.0, None)
    if inverse:
        w = np.where(w > 0, 1.0 / np.sqrt(np.where(w > 0, w, 1.0)), 0.0)
    else:
        w = np.sqrt(w)
    return (V * w) @ V.T


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

def apply_srht(X, m: int, seed: int, y=None) -> SketchOutput:
    """Subsampled randomized Hadamard transform ``sqrt(n'/m) B H D``.

    Rows are zero-padded to ``n' = 2**ceil(log2 n)``; ``D`` flips signs,
    ``H`` is the orthonormal Hadamard transform and ``B`` keeps each of the
    ``n'`` rows independently with probability ``m/n'``, so ``E[S^T S] = I``.
    """
    Z, yv = _stack(X, y)
    n, q = Z.shape
    p = q - (yv is not None)
    _check_m(m, n, p)
    n_pad = kernels.next_pow2(n)
    signs = 2.0 * stream(seed, "srht", "signs").integers(0, 2, size=n_pad) - 1.0
    keep = np.flatnonzero(stream(seed, "srht", "rows").random(n_pad) < m / n_pad)
    W = np.zeros((n_pad, q))
    W[:n] = Z
    W *= signs[:, None]
    kernels.fwht_inplace(W)
    out = W[keep] * math.sqrt(n_pad / m)
    Xs, ys = _split(out, yv is not None)
    c = method_constants(SketchSpec("srht", m, seed), m, n)
    return SketchOutput(
        Xs=Xs, ys=ys, m_nominal=m, m_eff=int(keep.size), n=n, gamma=m / n, tau=c.tau,
        alpha=c.alpha, family="srht", info={"signs": signs, "rows": keep, "n_pad": n_pad},
    )


def sse_pattern(n: int, m: int, zeta: int, seed: int):
    """Row positions ``(n, zeta)`` (distinct within each column) and signs."""
    words = stream(seed, "sse").bit_generator.random_raw(kernels.sse_word_count(n, zeta))
    return kernels.sse_pattern_from_bits(words, n, zeta, m)


def apply_sse(X, m: int, zeta: int, seed: int, y=None) -> SketchOutput:
    """Sparse sign embedding: every column of ``S`` holds ``zeta`` entries
    ``+-1/sqrt(zeta)`` at distinct uniformly chosen rows."""
    A, yv = _inputs(X, y)
    n, p = A.shape
    if not (isinstance(zeta, (int, np.integer)) and 1 <= zeta <= m):
        raise BadSparsity(f"sparsity zeta={zeta} must be an integer in [1, m={m}]")
    _check_m(m, n, p)
    zeta = int(zeta)
    words = stream(seed, "sse").bit_generator.random_raw(kernels.sse_word_count(n, zeta))
    rows, signs = kernels.sse_pattern_from_bits(words, n, zeta, m)
    scale = 1.0 / math.sqrt(zeta)
    Xs, ys, nops = kernels.sse_scatter(A, rows, signs, m, scale, y=yv)
    return SketchOutput(
        Xs=Xs, ys=ys, m_nominal=m, m_eff=m, n=n, gamma=m / n, tau=1.0, alpha=0,
        family="sse", info={"zeta": int(zeta), "nops": nops},
    )


def apply_iid(X, m: int, dist: Optional[IidDist], seed: int, y=None, method: str = "explicit") -> SketchOutput:
    """Dense sketch with i.i.d. entries ``T_ij / sqrt(m)``.

    Gaussian entries give ``alpha = 0``; other laws are sandwich-only
    (``alpha`` is ``None``) and carry their kurtosis. ``method="gram"`` is
    available for Gaussian entries only.
    """
    dist = dist or IidDist.gaussian()
    if dist.kappa4 <= KURTOSIS_FLOOR:
        raise KurtosisTooLow(
            f"kurtosis {dist.kappa4} <= {KURTOSIS_FLOOR}: too close to the minimum for inference"
        )
    Z, yv = _stack(X, y)
    n, q = Z.shape
    p = q - (yv is not None)
    _check_m(m, n, p)
    gen = stream(seed, "iid", "entries")
    if method == "gram":
        if not dist.is_gaussian:
            raise UnsupportedMethod("the gram route is exact only for Gaussian entries")
        # rows of S Z are i.i.d. N(0, Z^T Z / m)
        R = np.linalg.qr(Z, mode="r")
        out = gen.standard_normal((m, q)) @ R / math.sqrt(m)
    elif method == "explicit":
        T = dist.sampler(gen, (m, n))
        out = (T @ Z) / math.sqrt(m)
    else:
        raise UnsupportedMethod(f"unknown method {method!r}")
    Xs, ys = _split(out, yv is not None)
    return SketchOutput(
        Xs=Xs, ys=ys, m_nominal=m, m_eff=m, n=n, gamma=m / n, tau=1.0,
        alpha=0 if dist.is_gaussian else None, family="iid", kappa4=dist.kappa4,
        info={"dist": dist.name, "method": method},
    )


def haar_rows(m: int, n: int, seed: int) -> np.ndarray:
    """Explicit ``S0 = (G G^T)^{-1/2} G`` for an ``m x n`` Gaussian ``G``."""
    G = stream(seed, "haar", "explicit").standard_normal((m, n))
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    s_eff = np.maximum(s, HAAR_SV_FLOOR * s[0])
    return (U * (s / s_eff)) @ Vt


def apply_haar(X, m: int, seed: int, y=None, method: str = "explicit") -> SketchOutput:
    """Haar sketch ``S = sqrt(n/m) S0`` with ``S0`` uniform among ``m x n``
    matrices with orthonormal rows."""
    Z, yv = _stack(X, y)
    n, q = Z.shape
    p = q - (yv is not None)
    _check_m(m, n, p)
    if method == "gram" and m < q:
        method = "explicit"
    if method == "explicit":
        out = math.sqrt(n / m) * (haar_rows(m, n, seed) @ Z)
    elif method == "gram":
        gen = stream(seed, "haar", "gram")
        Qz, R = np.linalg.qr(Z)
        # Qz^T P Qz for a uniform rank-m projection P: matrix Beta via two Wisharts
        A1 = gen.standard_normal((m, q))
        A2 = gen.standard_normal((n - m, q))
        W1 = A1.T @ A1
        Wi = _sym_sqrt(W1 + A2.T @ A2, inverse=True)
        B = Wi @ W1 @ Wi
        C = math.sqrt(n / m) * (_sym_sqrt(B) @ R)
        out = _haar_frame(gen, m, q) @ C
    else:
        raise UnsupportedMethod(f"unknown method {method!r}")
    Xs, ys = _split(out, yv is not None)
    return SketchOutput(
        Xs=Xs, ys=ys, m_nominal=m, m_eff=m, n=n, gamma=m / n, tau=1.0 - m / n, alpha=0,
        family="haar", info={"method": method},
    )


def apply_uniform_subsample(X, m: int, seed: int, y=None) -> SketchOutput:
    """Keep each row with probability ``m/n``, scaled by ``sqrt(n/m)``.

    Raises :class:`DegenerateSample` when fewer than ``p`` rows survive; no
    redraw is attempted.
    """
    Z, yv = _stack(X, y)
    n, q = Z.shape
    p = q - (yv is not None)
    _check_m(m, n, p)
    keep = np.flatnonzero(stream(seed, "subsample", "rows").random(n) < m / n)
    if keep.size < p:
        raise DegenerateSample(f"only {keep.size} rows retained, need at least p={p}")
    out = Z[keep] * math.sqrt(n / m)
    Xs, ys = _split(out, yv is not None)
    return SketchOutput(
        Xs=Xs, ys=ys, m_nominal=m, m_eff=int(keep.size), n=n, gamma=m / n, tau=1.0 - m / n,
        alpha=None, family="subsample", info={"rows": keep},
    )


def apply_sketch(spec: SketchSpec, X, y=None) -> SketchOutput:
    """Dispatch on ``spec.family``."""
    fam = spec.family
    if fam == "srht":
        return apply_srht(X, spec.m, spec.seed, y=y)
    if fam == "sse":
        return apply_sse(X, spec.m, spec.zeta, spec.seed, y=y)
    if fam == "iid":
        return apply_iid(X, spec.m, spec.dist, spec.seed, y=y, method=spec.method)
    if fam == "haar":
        return apply_haar(X, spec.m, spec.seed, y=y, method=spec.method)
    return apply_uniform_subsample(X, spec.m, spec.seed, y=y)


def parse_family(text: str, m: int = 1, seed: int = 0, method: str = "explicit") -> SketchSpec:
    """Build a spec from a short family string.

    Accepted: ``srht``, ``countsketch``, ``sse`` / ``sse:ZETA``, ``gaussian`` /
    ``iid``, ``iid_t:DF``, ``haar``, ``subsample``.
    """
    t = text.strip().lower()
    if t in ("srht", "hadamard"):
        return SketchSpec("srht", m, seed)
    if t == "countsketch":
        return SketchSpec("sse", m, seed, zeta=1)
    if t == "sse":
        return SketchSpec("sse", m, seed, zeta=8)
    if t.startswith("sse:"):
        try:
            zeta = int(t.split(":", 1)[1])
        except ValueError:
            raise ConfigInvalid(f"bad sparsity in {text!r}") from None
        return SketchSpec("sse", m, seed, zeta=zeta)
    if t in ("gaussian", "iid", "iid_gaussian"):
        return SketchSpec("iid", m, seed, dist=IidDist.gaussian(), method=method)
    if t.startswith("iid_t:"):
        try:
            df = float(t.split(":", 1)[1])
        except ValueError:
            raise ConfigInvalid(f"bad degrees of freedom in {text!r}") from None
        return SketchSpec("iid", m, seed, dist=IidDist.scaled_t(df))
    if t == "haar":
        return SketchSpec("haar", m, seed, method=method)
    if t in ("subsample", "uniform", "uniform_subsample"):
        return SketchSpec("subsample", m, seed)
    raise ConfigInvalid(
        f"unknown family {text!r}; allowed: srht, countsketch, sse, sse:ZETA, gaussian, iid_t:DF, haar, subsample"
    )
