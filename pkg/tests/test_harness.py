import numpy as np
import pytest

from sketchinf.datagen import CaseConfig, gen_case1, gen_case2
from sketchinf.errors import ConfigInvalid
from sketchinf.harness import (
    ExperimentConfig,
    Target,
    delocalization_report,
    linear_fit,
    parse_target,
    run_bench,
    run_coverage,
    run_qf_clt,
    run_variance,
)
from sketchinf.linalg import DataMatrix
from sketchinf.stats import clopper_pearson


def test_parse_target_forms():
    assert parse_target("ls:1") == Target("ls", 1)
    assert parse_target("lsp:2").label == "lsp:2"
    assert parse_target("eigvec:1") == Target("eigvec", 1, 1)
    assert parse_target("eigvec:2:3").label == "eigvec:2:3"
    assert parse_target("ls_coord(1)") == Target("ls", 1)
    assert parse_target("ls_partial_coord(3)") == Target("lsp", 3)
    assert parse_target("eigvec(1, e2)") == Target("eigvec", 1, 2)
    for bad in ("ls", "eig:0", "ls:1:2", "foo:1"):
        with pytest.raises(ConfigInvalid):
            parse_target(bad)


def test_config_validation():
    base = dict(data=CaseConfig(1, 256, 4, 0), families=["srht"], m_grid=[64], targets=["eig:1"], seed=1)
    ExperimentConfig(**base)
    for bad in (dict(trials=49), dict(m_grid=[64, 64]), dict(m_grid=[]), dict(level=1.0),
                dict(families=[]), dict(targets=[]), dict(families=["fft"])):
        with pytest.raises(ConfigInvalid):
            ExperimentConfig(**{**base, **bad})
    cfg = ExperimentConfig(**{**base, "m_grid": [300]})
    with pytest.raises(ConfigInvalid):
        run_coverage(cfg)
    cfg = ExperimentConfig(**{**base, "targets": ["eig:5"]})
    with pytest.raises(ConfigInvalid):
        run_coverage(cfg)


def test_small_report_is_well_formed():
    cfg = ExperimentConfig(CaseConfig(1, 512, 5, 3), ["srht", "countsketch"], [64, 128],
                           ["ls:1", "lsp:1", "eig:1", "eigvec:1:1"], seed=5, trials=50)
    rep = run_coverage(cfg)
    assert len(rep.rows) == 2 * 2 * 4
    assert [(r.family, r.m) for r in rep.rows[:4]] == [("srht", 64)] * 4
    for r in rep.rows:
        used = r.trials - r.failures
        assert r.trials == 50 and 0 <= r.hits <= used
        cp = clopper_pearson(r.hits, used)
        assert (r.cp_lower, r.cp_upper) == (cp.lower, cp.upper)
        assert r.coverage == r.hits / used
        assert r.mean_width > 0
    assert rep.meta["trials"] == 50 and rep.meta["targets"][3] == "eigvec:1:1"


def test_level_half():
    cfg = ExperimentConfig(CaseConfig(1, 1024, 5, 4), ["srht"], [400], ["ls:1", "eig:1"], seed=9,
                           trials=400, level=0.5)
    for r in run_coverage(cfg).rows:
        assert clopper_pearson(r.hits, r.trials - r.failures).contains(0.5), r


def test_srht_eigenvalue_coverage_case1():
    cfg = ExperimentConfig(CaseConfig(1, 2048, 15, 1), ["srht"], [800], ["eig:1"], seed=3)
    r = run_coverage(cfg).rows[0]
    assert r.cp_lower <= 0.95 <= r.cp_upper


def test_reports_independent_of_thread_count():
    cfg = ExperimentConfig(CaseConfig(1, 512, 5, 3), ["sse:4", "gaussian", "subsample"], [64],
                           ["ls:1", "eig:2", "eigvec:1:2"], seed=11, trials=60)
    a, b = run_coverage(cfg, threads=1), run_coverage(cfg, threads=4)
    assert a.rows == b.rows
    va, vb = run_variance(cfg, threads=1), run_variance(cfg, threads=3)
    assert va.rows == vb.rows


def test_failures_are_counted_not_resampled():
    X = np.random.default_rng(0).standard_normal((40, 3))
    data = DataMatrix(X, X @ np.ones(3) + np.random.default_rng(1).standard_normal(40))
    cfg = ExperimentConfig(data, ["subsample"], [4], ["ls:1", "eig:1"], seed=2, trials=200)
    rep = run_coverage(cfg)
    for r in rep.rows:
        assert r.failures > 0
        assert r.hits + r.failures <= r.trials
        assert r.coverage == pytest.approx(r.hits / (r.trials - r.failures))


def test_countsketch_eigenvalue_variance_ratio():
    cfg = ExperimentConfig(CaseConfig(1, 2048, 15, 1), ["countsketch"], [800], ["eig:1"], seed=1)
    r = run_variance(cfg).rows[0]
    assert r.theory == 2.0 and 0.85 <= r.ratio <= 1.15


def test_haar_half_of_gaussian_at_half_aspect():
    cfg = ExperimentConfig(CaseConfig(1, 2048, 15, 1), ["haar", "gaussian"], [1024], ["eig:1"], seed=1,
                           method="gram")
    rep = run_variance(cfg)
    ratio = rep.row("haar", 1024, "eig:1").variance / rep.row("gaussian", 1024, "eig:1").variance
    assert abs(ratio - 0.5) <= 0.15


def test_linear_fit():
    slope, icpt, r2 = linear_fit([0, 1, 2], [1, 3, 5])
    assert (slope, icpt, r2) == pytest.approx((2, 1, 1))


def test_qf_clt_small_cases():
    with pytest.raises(ConfigInvalid):
        run_qf_clt("srht", 256, 64, trials=999)
    rep = run_qf_clt("srht", 256, 64, "srht_counter", trials=1000, seed=1)
    assert rep.frac_zero >= 0.2 and rep.ks_p < 0.01
    rep = run_qf_clt("subsample", 256, 64, "localized", trials=1000, seed=1)
    assert rep.distinct == 2 and rep.theory == 256
    rep = run_qf_clt("countsketch", 1024, 256, "delocalized", trials=2000, seed=1)
    assert rep.inner == pytest.approx(0, abs=1e-12) and abs(rep.ratio - 1) < 0.1 and rep.ks_p > 0.01


def test_qf_clt_custom_pair_and_t_theory():
    a = np.full(128, 128 ** -0.5)
    rep = run_qf_clt("iid_t:6", 128, 32, trials=1000, seed=2, method="explicit", pair=(a, a))
    assert rep.pair == "custom" and rep.theory == pytest.approx(2 + 3 / 128)


def test_bench_rows_and_iid_growth():
    rows = run_bench(["srht", "gaussian"], n=1024, p=5, m_grid=[100, 400, 800], reps=5, seed=1)
    assert [(r.family, r.m) for r in rows] == [("srht", 100), ("srht", 400), ("srht", 800),
                                               ("gaussian", 100), ("gaussian", 400), ("gaussian", 800)]
    assert all(r.reps == 5 and 0 < r.min_s <= r.median_s for r in rows)
    g = [r.median_s for r in rows if r.family == "gaussian"]
    assert linear_fit([100, 400, 800], g)[0] > 0


def test_delocalization_identity_block():
    rep = delocalization_report(np.eye(100)[:, :4])
    assert rep["max_leverage"] == pytest.approx(1.0)
    assert "srht" in rep["flags"] and "sse" in rep["flags"]


def test_delocalization_case1_clean():
    d = gen_case1(2048, 15, 1)
    rep = delocalization_report(d)
    assert rep["max_leverage"] < 0.25 and rep["flags"] == {}
    assert rep["max_normalized_residual"] is not None


def test_delocalization_case2_flagged():
    flagged = sum("srht" in delocalization_report(gen_case2(2048, 15, s).X)["flags"] for s in range(9))
    assert flagged >= 5
