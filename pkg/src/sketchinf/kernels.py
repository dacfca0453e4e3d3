"""Hot numeric kernels: the fast Walsh-Hadamard transform and the sparse
sign-embedding scatter.

Each kernel has an ``@njit`` implementation and a vectorised numpy twin.
The public wrappers dispatch on :func:`sketchinf._accel.get_backend`.
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import JIT_OPTS, njit
from .errors import BadShape, LengthNotPowerOfTwo

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


# ---------------------------------------------------------------------------
# FWHT
# ---------------------------------------------------------------------------

@njit(**JIT_OPTS)
def _fwht_numba(x):
    # x: (N, q) C-contiguous, N a power of two; transformed in place
    N, q = x.shape
    s = 0.7071067811865476
    h = 1
    while h < N:
        for start in range(0, N, 2 * h):
            for j in range(start, start + h):
                for c in range(q):
                    a = x[j, c]
                    b = x[j + h, c]
                    x[j, c] = (a + b) * s
                    x[j + h, c] = (a - b) * s
        h *= 2
    return x


def _fwht_numpy(x: np.ndarray) -> np.ndarray:
    N, q = x.shape
    h = 1
    while h < N:
        y = x.reshape(N // (2 * h), 2, h, q)
        a = y[:, 0].copy()
        b = y[:, 1]
        y[:, 0] = (a + b) * _INV_SQRT2
        y[:, 1] = (a - b) * _INV_SQRT2
        h *= 2
    return x


def fwht_inplace(x: np.ndarray) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform of each column of a 2-D float64
    array, in place. The leading dimension must be a power of two."""
    if x.ndim != 2:
        raise BadShape("fwht_inplace expects a 2-D array")
    if not is_pow2(x.shape[0]):
        raise LengthNotPowerOfTwo(f"length {x.shape[0]} is not a power of two")
    if not (x.flags.c_contiguous and x.dtype == np.float64):
        raise BadShape("fwht_inplace needs a C-contiguous float64 array")
    if _accel.get_backend() == "numba":
        return _fwht_numba(x)
    return _fwht_numpy(x)


def fwht(v) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform ``H_l v``.

    Works on a vector (length ``2**l``) or column-wise on a matrix. The input
    is not modified. Each butterfly stage scales by ``1/sqrt(2)``, so the
    transform is orthogonal and its own inverse.

    >>> fwht([1.0, 0.0])
    array([0.70710678, 0.70710678])
    """
    a = np.array(v, dtype=np.float64, copy=True)
    if a.ndim == 0:
        raise BadShape("fwht expects a vector or matrix")
    if not is_pow2(a.shape[0]):
        raise LengthNotPowerOfTwo(f"length {a.shape[0]} is not a power of two")
    if a.ndim == 1:
        return fwht_inplace(a.reshape(-1, 1)).ravel()
    return fwht_inplace(np.ascontiguousarray(a))


# ---------------------------------------------------------------------------
# Sparse sign embedding: distinct row draws (Floyd) and scatter
# ---------------------------------------------------------------------------

def sse_word_count(n: int, zeta: int) -> int:
    """64-bit words consumed by :func:`sse_pattern_from_bits`."""
    e = n * zeta
    return (e + 1) // 2 + (e + 63) // 64


@njit(**JIT_OPTS)
def _sse_pattern_numba(words, n, zeta, m):
    rows = np.empty((n, zeta), dtype=np.int64)
    signs = np.empty((n, zeta))
    seen = np.zeros(m, dtype=np.bool_)  # Floyd membership bitmap, cleared per column
    n_idx = (n * zeta + 1) // 2
    for i in range(n):
        for k in range(zeta):
            e = i * zeta + k
            w = words[e >> 1]
            if e & 1:
                v = np.int64(w >> np.uint64(32))
            else:
                v = np.int64(w & np.uint64(0xFFFFFFFF))
            j = m - zeta + k
            t = (v * (j + 1)) >> 32
            if seen[t]:
                t = j
            seen[t] = True
            rows[i, k] = t
            bit = (words[n_idx + (e >> 6)] >> np.uint64(e & 63)) & np.uint64(1)
            signs[i, k] = 2.0 * np.float64(bit) - 1.0
        for k in range(zeta):
            seen[rows[i, k]] = False
    return rows, signs


def _sse_pattern_numpy(words, n, zeta, m):
    e = n * zeta
    n_idx = (e + 1) // 2
    w = words[:n_idx]
    v = np.empty(2 * n_idx, dtype=np.int64)
    v[0::2] = (w & np.uint64(0xFFFFFFFF)).astype(np.int64)
    v[1::2] = (w >> np.uint64(32)).astype(np.int64)
    v = v[:e].reshape(n, zeta)
    rows = np.empty((n, zeta), dtype=np.int64)
    for k in range(zeta):
        j = m - zeta + k
        t = (v[:, k] * (j + 1)) >> 32
        if k:
            t = np.where(np.any(rows[:, :k] == t[:, None], axis=1), j, t)
        rows[:, k] = t
    idx = np.arange(e, dtype=np.uint64)
    sw = words[n_idx + (idx >> np.uint64(6)).astype(np.int64)]
    bits = (sw >> (idx & np.uint64(63))) & np.uint64(1)
    signs = np.where(bits == 1, 1.0, -1.0).reshape(n, zeta)
    return rows, signs


def sse_pattern_from_bits(words: np.ndarray, n: int, zeta: int, m: int):
    """Turn raw 64-bit words into an SSE pattern.

    Each column gets ``zeta`` distinct rows in ``[0, m)`` by Floyd's subset
    algorithm, fed 32-bit uniforms mapped with a multiply-shift (bias at most
    ``m / 2**32`` per draw), and one independent random sign bit per entry.
    Both backends return identical arrays.
    """
    words = np.ascontiguousarray(words, dtype=np.uint64)
    if not (1 <= zeta <= m < 2 ** 31):
        raise ValueError("need 1 <= zeta <= m < 2**31")
    if words.shape[0] < sse_word_count(n, zeta):
        raise ValueError("not enough random words")
    if _accel.get_backend() == "numba":
        return _sse_pattern_numba(words, int(n), int(zeta), int(m))
    return _sse_pattern_numpy(words, int(n), int(zeta), int(m))


# ---------------------------------------------------------------------------
# ---------------------------------------------------------------------------

@njit(**JIT_OPTS)
def _scatter_dense_x(X, rows, signs, m, scale):
    n, q = X.shape
    out = np.zeros((m, q))
    for i in range(n):
        for k in range(rows.shape[1]):
            r = rows[i, k]
            w = signs[i, k] * scale
            for c in range(q):
                out[r, c] += w * X[i, c]
    return out


@njit(**JIT_OPTS)
def _scatter_dense_xy(X, y, rows, signs, m, scale):
    n, q = X.shape
    out = np.zeros((m, q))
    oy = np.zeros(m)
    for i in range(n):
        yi = y[i]
        for k in range(rows.shape[1]):
            r = rows[i, k]
            w = signs[i, k] * scale
            for c in range(q):
                out[r, c] += w * X[i, c]
            oy[r] += w * yi
    return out, oy


@njit(**JIT_OPTS)
def _scatter_sparse(X, rows, signs, m, scale):
    n, q = X.shape
    out = np.zeros((m, q))
    for i in range(n):
        for k in range(rows.shape[1]):
            r = rows[i, k]
            w = signs[i, k] * scale
            for c in range(q):
                xv = X[i, c]
                if xv != 0.0:
                    out[r, c] += w * xv
    return out


@njit(**JIT_OPTS)
def _count_nonzero(X):
    nnz = 0
    for v in X.ravel():
        nnz += v != 0.0
    return nnz


@njit(**JIT_OPTS)
def _sse_scatter_numba(X, y, rows, signs, m, scale):
    # y has length n, or 0 when there is no response
    n, q = X.shape
    zeta = rows.shape[1]
    has_y = y.shape[0] > 0
    nx = _count_nonzero(X)
    ny = _count_nonzero(y)
    if has_y and nx == n * q and ny == n:
        out, oy = _scatter_dense_xy(X, y, rows, signs, m, scale)
    elif nx == n * q:
        out = _scatter_dense_x(X, rows, signs, m, scale)
        oy = _scatter_sparse(y.reshape(-1, 1), rows, signs, m, scale)[:, 0] if has_y else np.zeros(0)
    else:
        out = _scatter_sparse(X, rows, signs, m, scale)
        oy = _scatter_sparse(y.reshape(-1, 1), rows, signs, m, scale)[:, 0] if has_y else np.zeros(0)
    return out, oy, zeta * (nx + ny)


def _sse_scatter_numpy(X, y, rows, signs, m, scale):
    n, q = X.shape
    zeta = rows.shape[1]
    w = (signs * scale).reshape(-1)
    flat = rows.reshape(-1)
    out = np.zeros((m, q))
    np.add.at(out, flat, w[:, None] * np.repeat(X, zeta, axis=0))
    nnz = int(np.count_nonzero(X))
    oy = np.zeros(m if y.shape[0] else 0)
    if y.shape[0]:
        np.add.at(oy, flat, w * np.repeat(y, zeta))
        nnz += int(np.count_nonzero(y))
    return out, oy, zeta * nnz


def sse_scatter(X: np.ndarray, rows: np.ndarray, signs: np.ndarray, m: int, scale: float, y=None):
    """Accumulate ``S @ X`` (and ``S @ y``) for a sparse sign matrix given
    column-wise.

    Column ``i`` of ``S`` has entries ``signs[i, k] * scale`` at row
    ``rows[i, k]``. Returns ``(SX, Sy, nops)``; ``Sy`` is ``None`` without
    ``y`` and ``nops`` counts the scalar multiply-adds performed (zero
    entries are skipped).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    yv = np.empty(0) if y is None else np.ascontiguousarray(y, dtype=np.float64).reshape(-1)
    if yv.shape[0] not in (0, X.shape[0]):
        raise BadShape("y length does not match X")
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    signs = np.ascontiguousarray(signs, dtype=np.float64)
    if _accel.get_backend() == "numba":
        out, oy, nops = _sse_scatter_numba(X, yv, rows, signs, int(m), float(scale))
    else:
        out, oy, nops = _sse_scatter_numpy(X, yv, rows, signs, int(m), float(scale))
    return out, (oy if y is not None else None), int(nops)
