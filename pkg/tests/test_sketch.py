import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy import stats

from sketchinf import kernels
from sketchinf.datagen import gen_unit_pair
from sketchinf.errors import (
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
from sketchinf.sketch import (
    IidDist,
    SketchSpec,
    apply_haar,
    apply_iid,
    apply_sketch,
    apply_srht,
    apply_sse,
    apply_uniform_subsample,
    haar_rows,
    method_constants,
    parse_family,
    sse_pattern,
)

from conftest import sylvester


def _X(n=64, p=3, seed=0):
    return np.random.default_rng(seed).standard_normal((n, p))


def _qf(sk):
    """``a^T S^T S b`` from the sketch of the two-column matrix ``[a, b]``."""
    return float(sk.Xs[:, 0] @ sk.Xs[:, 1])


# -- SRHT ----------------------------------------------------------------------

@pytest.mark.parametrize("n", [5, 16, 37, 64])
def test_srht_matches_dense_construction(n):
    X, y = _X(n, 2, n), np.arange(n, dtype=float)
    m = max(2, n // 3)
    sk = apply_srht(X, m, seed=4, y=y)
    n_pad = sk.info["n_pad"]
    assert n_pad == kernels.next_pow2(n)
    D = np.diag(sk.info["signs"])
    B = np.eye(n_pad)[sk.info["rows"]]
    S = math.sqrt(n_pad / m) * B @ sylvester(n_pad) @ D
    S = S[:, :n]  # zero padding rows of X contribute nothing
    np.testing.assert_allclose(sk.Xs, S @ X, rtol=0, atol=1e-10)
    np.testing.assert_allclose(sk.ys, S @ y, rtol=0, atol=1e-10)
    assert sk.m_eff == len(sk.info["rows"])


def test_srht_metadata():
    sk = apply_srht(_X(2048, 2), 800, 1)
    assert sk.gamma == 800 / 2048 and sk.tau == 0.609375 and sk.alpha == 1
    assert sk.m_nominal == 800 and sk.family == "srht"


def test_srht_m_eff_mean():
    X = _X(2048, 1)
    counts = np.array([apply_srht(X, 800, s).m_eff for s in range(5000)])
    se = math.sqrt(800 * (1 - 800 / 2048)) / math.sqrt(5000)
    assert abs(counts.mean() - 800) <= 3 * se


def test_srht_errors():
    X = _X(64, 3)
    with pytest.raises(SketchTooSmall):
        apply_srht(X, 2, 0)
    with pytest.raises(SketchTooLarge):
        apply_srht(X, 64, 0)
    with pytest.raises(NonFinite):
        apply_srht(np.where(X > 1, np.inf, X), 10, 0)
    with pytest.raises(BadShape):
        apply_srht(X, 10, 0, y=np.ones(5))


# -- SSE -----------------------------------------------------------------------

def _sse_dense(n, m, zeta, seed):
    rows, signs = sse_pattern(n, m, zeta, seed)
    S = np.zeros((m, n))
    for i in range(n):
        S[rows[i], i] = signs[i] / math.sqrt(zeta)
    return S


@pytest.mark.parametrize("zeta", [1, 3, 8])
def test_sse_column_structure(zeta):
    S = _sse_dense(200, 20, zeta, 5)
    np.testing.assert_array_equal(np.count_nonzero(S, axis=0), zeta)
    np.testing.assert_allclose(np.diag(S.T @ S), 1.0, rtol=0, atol=1e-15)
    X = _X(200, 3)
    sk = apply_sse(X, 20, zeta, 5, y=X[:, 0])
    np.testing.assert_allclose(sk.Xs, S @ X, rtol=0, atol=1e-12)
    np.testing.assert_allclose(sk.ys, S @ X[:, 0], rtol=0, atol=1e-12)
    assert sk.tau == 1.0 and sk.alpha == 0 and sk.m_eff == 20
    assert sk.info["zeta"] == zeta


def test_sse_op_count_scales_with_zeta():
    X = _X(500, 4)
    X[X < 0] = 0.0
    nnz = np.count_nonzero(X)
    ops = [apply_sse(X, 50, z, 1).info["nops"] for z in (2, 4, 8)]
    assert ops == [2 * nnz, 4 * nnz, 8 * nnz]


def test_sse_errors():
    X = _X(64, 3)
    for zeta in (0, 11, 2.5):
        with pytest.raises(BadSparsity):
            apply_sse(X, 10, zeta, 0)
    with pytest.raises(SketchTooLarge):
        apply_sse(X, 64, 1, 0)


def _qf_variance(make, n, trials, style, norm):
    a, b = gen_unit_pair(style, n, seed=1)
    A = np.column_stack([a, b])
    vals = np.array([_qf(make(A, s)) for s in range(trials)])
    return np.var(norm * (vals - a @ b))


def test_sse_quadratic_form_variance_countsketch():
    n, m = 4096, 1024
    v0 = _qf_variance(lambda A, s: apply_sse(A, m, 1, s), n, 5000, "delocalized", math.sqrt(m))
    v1 = _qf_variance(lambda A, s: apply_sse(A, m, 1, s), n, 5000, "delocalized_same", math.sqrt(m))
    assert abs(v0 - 1) <= 0.1
    assert abs(v1 - 2) <= 0.2


# -- IID -----------------------------------------------------------------------

def test_iid_gaussian_quadratic_form_variance():
    n, m = 2048, 512
    v = _qf_variance(lambda A, s: apply_iid(A, m, None, s, method="gram"), n, 5000,
                     "delocalized_same", math.sqrt(m))
    assert abs(v - 2) <= 0.2


def test_iid_scaled_t_quadratic_form_variance():
    n, m = 256, 64
    dist = IidDist.scaled_t(6)
    assert dist.kappa4 == 6.0
    v = _qf_variance(lambda A, s: apply_iid(A, m, dist, s), n, 5000, "flat", math.sqrt(m))
    expected = 2 + 3 / n
    assert abs(v / expected - 1) <= 0.1


def test_iid_metadata_and_errors():
    X = _X(64, 3)
    sk = apply_iid(X, 16, None, 0)
    assert sk.alpha == 0 and sk.tau == 1.0 and sk.kappa4 == 3.0
    sk = apply_iid(X, 16, IidDist.scaled_t(10), 0)
    assert sk.alpha is None and sk.sandwich_only and sk.kappa4 == pytest.approx(4.0)
    with pytest.raises(KurtosisTooLow):
        apply_iid(X, 16, IidDist.rademacher(), 0)
    with pytest.raises(UnsupportedMethod):
        apply_iid(X, 16, IidDist.scaled_t(10), 0, method="gram")
    with pytest.raises(ConfigInvalid):
        IidDist.scaled_t(4)


def test_iid_from_ppf():
    from scipy.special import ndtri

    dist = IidDist.from_ppf("probit", ndtri, 3.0)
    sk = apply_iid(_X(64, 2), 16, dist, 0)
    assert sk.Xs.shape == (16, 2) and sk.kappa4 == 3.0


def test_iid_explicit_matches_dense():
    X = _X(40, 2)
    sk = apply_iid(X, 10, None, 3)
    from sketchinf.rng import stream

    T = stream(3, "iid", "entries").standard_normal((10, 40))
    np.testing.assert_allclose(sk.Xs, T @ X / math.sqrt(10), rtol=0, atol=1e-12)


# -- Haar ----------------------------------------------------------------------

def test_haar_rows_orthonormal():
    S0 = haar_rows(20, 50, 1)
    np.testing.assert_allclose(S0 @ S0.T, np.eye(20), rtol=0, atol=1e-10)
    S = math.sqrt(50 / 20) * S0
    np.testing.assert_allclose(S @ S.T @ S, (50 / 20) * S, rtol=0, atol=1e-10)


def test_haar_quadratic_form_variance():
    n, m = 2048, 512
    g = m / n
    norm = math.sqrt(m / (1 - g))
    v0 = _qf_variance(lambda A, s: apply_haar(A, m, s, method="gram"), n, 5000, "delocalized", norm)
    v1 = _qf_variance(lambda A, s: apply_haar(A, m, s, method="gram"), n, 5000, "delocalized_same", norm)
    assert abs(v0 - 1) <= 0.1
    assert abs(v1 - 2) <= 0.2


@pytest.mark.parametrize("family", ["haar", "gaussian"])
def test_gram_route_matches_explicit_in_law(family):
    n, m, trials = 48, 12, 1500
    a, b = gen_unit_pair("angle", n, seed=2, theta=1.0)
    A = np.column_stack([a, b])
    spec = lambda s, meth: parse_family(family, m, s, meth)
    ex = np.array([_qf(apply_sketch(spec(s, "explicit"), A)) for s in range(trials)])
    gr = np.array([_qf(apply_sketch(spec(s, "gram"), A)) for s in range(trials, 2 * trials)])
    assert stats.ks_2samp(ex, gr).pvalue > 0.001
    aa = np.array([np.sum(apply_sketch(spec(s, "gram"), A).Xs[:, 0] ** 2) for s in range(trials)])
    assert stats.ks_2samp(aa, [np.sum(apply_sketch(spec(s, "explicit"), A).Xs[:, 0] ** 2)
                               for s in range(trials)]).pvalue > 0.001


def test_haar_metadata():
    sk = apply_haar(_X(64, 3), 32, 0)
    assert sk.tau == 0.5 and sk.alpha == 0 and sk.gamma == 0.5


# -- uniform subsampling -------------------------------------------------------

def test_subsample_near_identity():
    X, y = _X(64, 3), np.arange(64.0)
    sk = apply_uniform_subsample(X, 63, 0, y=y)
    rows = sk.info["rows"]
    np.testing.assert_array_equal(sk.Xs, X[rows] * math.sqrt(64 / 63))
    np.testing.assert_array_equal(sk.ys, y[rows] * math.sqrt(64 / 63))
    assert sk.m_eff == len(rows) >= 55
    assert sk.alpha is None and sk.tau == pytest.approx(1 / 64)


def test_subsample_quadratic_form_variance():
    n, m = 2048, 512
    norm = math.sqrt(m / (1 - m / n))
    v = _qf_variance(lambda A, s: apply_uniform_subsample(A, m, s), n, 5000, "flat", norm)
    assert abs(v - 1) <= 0.1


def test_subsample_localized_two_values():
    a, _ = gen_unit_pair("localized", 256)
    A = np.column_stack([a, a])
    vals = {_qf(apply_uniform_subsample(A, 64, s)) for s in range(2000)}
    assert len(vals) == 2


def test_subsample_degenerate():
    # with m = p = 3 of n = 10 rows, fewer than 3 survive in about 35% of draws
    X = _X(10, 3)
    outcomes = []
    for s in range(200):
        try:
            outcomes.append(apply_uniform_subsample(X, 3, s).m_eff)
        except DegenerateSample:
            outcomes.append(None)
    assert 0 < outcomes.count(None) < 200
    assert all(k is None or k >= 3 for k in outcomes)


# -- shared properties ---------------------------------------------------------

FAMILY_CASES = [
    ("srht", lambda X, s: apply_srht(X, 32, s)),
    ("sse", lambda X, s: apply_sse(X, 32, 4, s)),
    ("countsketch", lambda X, s: apply_sse(X, 32, 1, s)),
    ("gaussian", lambda X, s: apply_iid(X, 32, None, s)),
    ("haar", lambda X, s: apply_haar(X, 32, s)),
    ("subsample", lambda X, s: apply_uniform_subsample(X, 32, s)),
]


@pytest.mark.parametrize("name,make", FAMILY_CASES)
def test_unbiased_and_norm_preserving(name, make):
    X = _X(128, 4, 7)
    grams = np.array([(lambda sk: sk.Xs.T @ sk.Xs)(make(X, s)) for s in range(1000)])
    target = X.T @ X
    se_f = math.sqrt(np.sum(grams.var(axis=0, ddof=1)) / len(grams))
    assert np.linalg.norm(grams.mean(axis=0) - target) <= 3 * se_f
    fro = np.trace(grams, axis1=1, axis2=2)
    assert abs(fro.mean() - np.sum(X ** 2)) <= 3 * fro.std(ddof=1) / math.sqrt(len(fro))
    # error of the running mean decays like N^-1/2 over three decades
    cums = np.cumsum(grams, axis=0)
    Ns = np.array([10, 100, 1000])
    errs = [np.linalg.norm(cums[N - 1] / N - target) for N in Ns]
    slope = np.polyfit(np.log(Ns), np.log(errs), 1)[0]
    assert -0.9 < slope < -0.2


@pytest.mark.parametrize("name,make", FAMILY_CASES)
def test_deterministic_across_threads(name, make):
    X = _X(128, 4, 8)
    ref = [make(X, s).Xs for s in range(6)]
    with ThreadPoolExecutor(4) as ex:
        got = list(ex.map(lambda s: make(X, s).Xs, range(6)))
    for a, b in zip(ref, got):
        assert np.array_equal(a, b)
    assert not np.array_equal(ref[0], ref[1])


def test_method_constants_table():
    c = method_constants(SketchSpec("srht", 800, 0), 800, 2048)
    assert c.tau == 0.609375 and c.alpha == 1
    assert c.eigval_factor == pytest.approx(1.828125, abs=1e-15)
    assert c.eigvec_factor == 0.609375
    assert method_constants(SketchSpec("haar", 1024, 0), 1024, 2048).eigval_factor == 1.0
    for m, n in ((20, 100), (800, 2048)):
        assert tuple(method_constants(SketchSpec("countsketch", m, 0), m, n)) == (1.0, 0, 2.0, 1.0)
        assert tuple(method_constants(SketchSpec("iid", m, 0), m, n)) == (1.0, 0, 2.0, 1.0)
    c = method_constants(SketchSpec("subsample", 512, 0), 512, 2048)
    assert c.tau == 0.75 and c.alpha is None and c.eigval_factor is None
    c = method_constants(SketchSpec("iid", 10, 0, dist=IidDist.scaled_t(8)), 10, 100)
    assert c.alpha is None


def test_parse_family():
    assert parse_family("countsketch").zeta == 1
    assert parse_family("sse").zeta == 8
    assert parse_family("sse:3").zeta == 3
    assert parse_family("gaussian", method="gram").method == "gram"
    assert parse_family("iid_t:8").dist.kappa4 == pytest.approx(4.5)
    assert parse_family("haar").label == "haar" and parse_family("sse:8").label == "sse8"
    for bad in ("fft", "sse:x", "iid_t:y"):
        with pytest.raises(ConfigInvalid):
            parse_family(bad)
    with pytest.raises(ConfigInvalid):
        SketchSpec("nope", 10, 0)
    with pytest.raises(UnsupportedMethod):
        SketchSpec("haar", 10, 0, method="magic")
