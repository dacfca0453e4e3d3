import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sketchinf import _accel, kernels
from sketchinf.errors import BadShape, LengthNotPowerOfTwo
from sketchinf.rng import stream

from conftest import sylvester


def test_fwht_length_one_is_identity(backend):
    assert kernels.fwht([7.0]).tolist() == [7.0]


def test_fwht_length_two(backend):
    np.testing.assert_allclose(kernels.fwht([1.0, 0.0]), [2 ** -0.5, 2 ** -0.5], rtol=0, atol=1e-15)


def test_fwht_involution_and_norm(backend):
    v = np.random.default_rng(3).standard_normal(8)
    w = kernels.fwht(v)
    np.testing.assert_allclose(kernels.fwht(w), v, rtol=0, atol=1e-12)
    assert abs(np.linalg.norm(w) - np.linalg.norm(v)) < 1e-12
    np.testing.assert_allclose(w, sylvester(8) @ v, rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32, 64, 128])
def test_fwht_matches_dense_hadamard(backend, n):
    X = np.random.default_rng(n).standard_normal((n, 3))
    np.testing.assert_allclose(kernels.fwht(X), sylvester(n) @ X, rtol=0, atol=1e-10)


def test_fwht_does_not_modify_input(backend):
    v = np.arange(4.0)
    kernels.fwht(v)
    assert v.tolist() == [0.0, 1.0, 2.0, 3.0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 7).flatmap(
    lambda l: st.lists(st.floats(-1e3, 1e3), min_size=2 ** l, max_size=2 ** l)))
def test_fwht_is_orthogonal_involution(vals):
    v = np.array(vals)
    w = kernels.fwht(v)
    np.testing.assert_allclose(kernels.fwht(w), v, rtol=0, atol=1e-9 * max(1.0, np.abs(v).max()))


def test_fwht_rejects_bad_lengths():
    with pytest.raises(LengthNotPowerOfTwo):
        kernels.fwht(np.ones(6))
    with pytest.raises(BadShape):
        kernels.fwht(np.float64(1.0))
    with pytest.raises(BadShape):
        kernels.fwht_inplace(np.ones((4, 2), dtype=np.float32))


def test_next_pow2():
    assert [kernels.next_pow2(k) for k in (1, 2, 3, 5, 1000, 2048, 2049)] == [1, 2, 4, 8, 1024, 2048, 4096]


def test_backends_agree_on_fwht():
    X = np.random.default_rng(0).standard_normal((256, 5))
    out = {}
    for b in ("numba", "numpy"):
        _accel.set_backend(b)
        out[b] = kernels.fwht(X)
    _accel.set_backend("numba")
    np.testing.assert_allclose(out["numba"], out["numpy"], rtol=0, atol=1e-13)


# -- SSE pattern and scatter ---------------------------------------------------

def _words(n, zeta, seed=0):
    return stream(seed, "test").bit_generator.random_raw(kernels.sse_word_count(n, zeta))


def test_sse_pattern_rows_are_distinct_and_in_range(backend):
    n, m, zeta = 3000, 40, 6
    rows, signs = kernels.sse_pattern_from_bits(_words(n, zeta), n, zeta, m)
    assert rows.shape == (n, zeta)
    assert rows.min() >= 0 and rows.max() < m
    assert all(len(set(r)) == zeta for r in rows)
    assert set(np.unique(signs)) == {-1.0, 1.0}


def test_sse_pattern_zeta_equals_m_uses_every_row(backend):
    rows, _ = kernels.sse_pattern_from_bits(_words(50, 5), 50, 5, 5)
    assert all(sorted(r) == [0, 1, 2, 3, 4] for r in rows)


def test_sse_pattern_backends_identical():
    w = _words(1000, 8, seed=5)
    _accel.set_backend("numpy")
    a = kernels.sse_pattern_from_bits(w, 1000, 8, 77)
    _accel.set_backend("numba")
    b = kernels.sse_pattern_from_bits(w, 1000, 8, 77)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_sse_pattern_subsets_are_uniform():
    # all C(5, 3) = 10 row subsets should be equally likely
    n, m, zeta = 20000, 5, 3
    rows, signs = kernels.sse_pattern_from_bits(_words(n, zeta, seed=9), n, zeta, m)
    subsets = list(itertools.combinations(range(m), zeta))
    idx = {s: i for i, s in enumerate(subsets)}
    counts = np.bincount([idx[tuple(sorted(r))] for r in rows], minlength=len(subsets))
    assert stats.chisquare(counts).pvalue > 1e-3
    assert abs(signs.mean()) < 4 / np.sqrt(n * zeta)


def _dense_S(rows, signs, m, scale):
    n = rows.shape[0]
    S = np.zeros((m, n))
    for i in range(n):
        S[rows[i], i] = signs[i] * scale
    return S


def test_sse_scatter_matches_dense_matrix(backend):
    n, m, zeta = 300, 40, 4
    rows, signs = kernels.sse_pattern_from_bits(_words(n, zeta, 2), n, zeta, m)
    X = np.random.default_rng(1).standard_normal((n, 3))
    y = np.random.default_rng(2).standard_normal(n)
    SX, Sy, nops = kernels.sse_scatter(X, rows, signs, m, 0.5, y=y)
    S = _dense_S(rows, signs, m, 0.5)
    np.testing.assert_allclose(SX, S @ X, rtol=0, atol=1e-12)
    np.testing.assert_allclose(Sy, S @ y, rtol=0, atol=1e-12)
    assert nops == zeta * (X.size + n)


def test_sse_scatter_skips_zeros(backend):
    n, m, zeta = 200, 30, 3
    rows, signs = kernels.sse_pattern_from_bits(_words(n, zeta, 4), n, zeta, m)
    X = np.random.default_rng(5).standard_normal((n, 4))
    X[X < 0.3] = 0.0
    SX, Sy, nops = kernels.sse_scatter(X, rows, signs, m, 1.0)
    assert Sy is None
    assert nops == zeta * np.count_nonzero(X)
    np.testing.assert_allclose(SX, _dense_S(rows, signs, m, 1.0) @ X, rtol=0, atol=1e-12)


def test_sse_op_count_doubles_with_zeta():
    n, m = 500, 64
    X = np.random.default_rng(6).standard_normal((n, 5))
    X[::3] = 0.0
    ops = []
    for zeta in (2, 4, 8):
        rows, signs = kernels.sse_pattern_from_bits(_words(n, zeta), n, zeta, m)
        ops.append(kernels.sse_scatter(X, rows, signs, m, 1.0)[2])
    assert ops[1] == 2 * ops[0] and ops[2] == 2 * ops[1]


def test_sse_scatter_backends_identical():
    n, m, zeta = 400, 50, 5
    rows, signs = kernels.sse_pattern_from_bits(_words(n, zeta, 7), n, zeta, m)
    X = np.random.default_rng(8).standard_normal((n, 6))
    X[::7, 2] = 0.0
    res = {}
    for b in ("numba", "numpy"):
        _accel.set_backend(b)
        res[b] = kernels.sse_scatter(X, rows, signs, m, 0.3, y=X[:, 0])
    _accel.set_backend("numba")
    np.testing.assert_allclose(res["numba"][0], res["numpy"][0], rtol=0, atol=1e-13)
    np.testing.assert_allclose(res["numba"][1], res["numpy"][1], rtol=0, atol=1e-13)
    assert res["numba"][2] == res["numpy"][2]


def test_env_flag_selects_numpy_backend():
    code = "from sketchinf import get_backend; print(get_backend())"
    env = dict(os.environ, SKETCHINF_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["SKETCHINF_DISABLE_NUMBA"] = ""
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")
