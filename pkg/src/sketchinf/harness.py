"""Monte Carlo experiments: CI coverage, pivot variances, quadratic-form
CLT checks, timing and delocalization diagnostics.

Trial ``t`` of cell ``(family, m)`` always uses the seed
``child_seed(master, family, m, t)``, and results are collected by trial
index, so reports do not depend on the worker count.
"""

from __future__ import annotations

import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import ls as lsmod
from . import pca as pcamod
from .datagen import CaseConfig, gen_case1, gen_unit_pair
from .errors import ConfigInvalid, SketchInfError
from .linalg import DataMatrix, solve_ls, sym_eig, thin_svd
from .rng import child_seed
from .sketch import apply_sketch, parse_family
from .stats import clopper_pearson, ks_statistic

TARGET_KINDS = ("ls", "lsp", "eig", "eigvec")
_TARGET_RE = re.compile(r"^\s*(ls|lsp|eig|eigvec)\s*:\s*(\d+)\s*(?::\s*(\d+))?\s*$")
_TARGET_LONG_RE = re.compile(r"^\s*(ls_coord|ls_partial_coord|eig|eigvec)\s*\(\s*(\d+)\s*(?:,\s*e?(\d+)\s*)?\)\s*$")
_LONG = {"ls_coord": "ls", "ls_partial_coord": "lsp", "eig": "eig", "eigvec": "eigvec"}


@dataclass(frozen=True)
class Target:
    """A scalar estimand. ``index`` and ``c_index`` are 1-based."""

    kind: str
    index: int
    c_index: int = 1

    @property
    def label(self) -> str:
        if self.kind == "eigvec":
            return f"eigvec:{self.index}:{self.c_index}"
        return f"{self.kind}:{self.index}"


def parse_target(text: str) -> Target:
    """``ls:J``, ``lsp:J``, ``eig:I``, ``eigvec:I`` or ``eigvec:I:K`` (``c = e_K``).
    The long forms ``ls_coord(1)``, ``eigvec(1, e1)`` are accepted too."""
    mt = _TARGET_RE.match(text) or _TARGET_LONG_RE.match(text)
    if not mt:
        raise ConfigInvalid(f"bad target {text!r}; expected ls:J, lsp:J, eig:I or eigvec:I[:K]")
    kind = _LONG.get(mt.group(1), mt.group(1))
    idx = int(mt.group(2))
    cidx = int(mt.group(3)) if mt.group(3) else 1
    if idx < 1 or cidx < 1:
        raise ConfigInvalid(f"target indices are 1-based: {text!r}")
    if kind != "eigvec" and mt.group(3):
        raise ConfigInvalid(f"only eigvec targets take a direction: {text!r}")
    return Target(kind, idx, cidx)


@dataclass(frozen=True)
class CsvSource:
    path: str
    y_col: Optional[int] = None
    has_header: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    data: Union[CaseConfig, CsvSource, DataMatrix]
    families: tuple
    m_grid: tuple
    targets: tuple
    seed: int
    trials: int = 500
    level: float = 0.95
    method: str = "explicit"  # route for gaussian / haar sketches
    estimator: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        tg = tuple(t if isinstance(t, Target) else parse_target(t) for t in self.targets)
        object.__setattr__(self, "targets", tg)
        if self.trials < 50:
            raise ConfigInvalid(f"trials must be >= 50, got {self.trials}")
        if not self.m_grid or any(b <= a for a, b in zip(self.m_grid, self.m_grid[1:])):
            raise ConfigInvalid("m_grid must be non-empty and strictly increasing")
        if not self.families:
            raise ConfigInvalid("families must be non-empty")
        if not self.targets:
            raise ConfigInvalid("targets must be non-empty")
        if not (0.0 < self.level < 1.0):
            raise ConfigInvalid("level must lie in (0, 1)")
        for f in self.families:
            parse_family(f)


def load_data(source) -> DataMatrix:
    if isinstance(source, DataMatrix):
        return source
    if isinstance(source, CaseConfig):
        return source.generate()
    if isinstance(source, CsvSource):
        from .io import load_csv

        return load_csv(source.path, has_header=source.has_header, y_col=source.y_col)
    raise ConfigInvalid(f"unsupported data source {source!r}")


@dataclass
class GroundTruth:
    data: DataMatrix
    beta: Optional[np.ndarray]
    xty: Optional[np.ndarray]
    lambdas: np.ndarray
    vectors: np.ndarray
    U: np.ndarray

    @classmethod
    def from_data(cls, data: DataMatrix) -> "GroundTruth":
        svd = thin_svd(data.X)
        eig = sym_eig(data.X.T @ data.X)
        beta = xty = None
        if data.y is not None:
            beta = solve_ls(data.X, data.y)
            xty = data.X.T @ data.y
        return cls(data, beta, xty, eig.lambdas, eig.vectors, svd.U)


def _check_cell_inputs(cfg: ExperimentConfig, truth: GroundTruth):
    n, p = truth.data.n, truth.data.p
    for m in cfg.m_grid:
        if not (p < m < n):
            raise ConfigInvalid(f"sketch size {m} must lie strictly between p={p} and n={n}")
    for t in cfg.targets:
        if t.kind in ("ls", "lsp") and truth.beta is None:
            raise ConfigInvalid(f"target {t.label} needs a response vector")
        if t.index > p or t.c_index > p:
            raise ConfigInvalid(f"target {t.label} exceeds p={p}")


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------

@dataclass
class TrialOutcome:
    hit: np.ndarray  # per target: 1 covered, 0 missed, -1 failed
    width: np.ndarray
    pivot: np.ndarray
    theory: np.ndarray


def _evaluate(sk, truth: GroundTruth, targets, level: float, estimator: str):
    k = len(targets)
    hit = np.full(k, -1, dtype=np.int8)
    width = np.full(k, np.nan)
    pivot = np.full(k, np.nan)
    theory = np.full(k, np.nan)
    cache = {}
    for j, t in enumerate(targets):
        try:
            if t.kind in ("ls", "lsp"):
                kind = "complete" if t.kind == "ls" else "partial"
                if kind not in cache:
                    cache[kind] = lsmod.ls_infer(sk, kind, xty=truth.xty, level=level, estimator=estimator)
                res = cache[kind]
                c = t.index - 1
                lo, hi = lsmod.ls_confidence_intervals(res, level)[c]
                true = truth.beta[c]
                pivot[j] = math.sqrt(sk.m_nominal) * (res.beta_hat[c] - true) / math.sqrt(res.sigma_hat[c, c])
                theory[j] = res.scale * sk.m_nominal
            else:
                if "pca" not in cache:
                    cache["pca"] = pcamod.pca_infer(sk, U_full=truth.U, level=level)
                res = cache["pca"]
                i = t.index - 1
                if t.kind == "eig":
                    lo, hi = pcamod.eigenvalue_ci(res, i, level)
                    true = truth.lambdas[i]
                    pivot[j] = pcamod.eigenvalue_pivot(res, i, true)
                    theory[j] = res.eigval_factors[i]
                else:
                    cvec = np.zeros(truth.data.p)
                    cvec[t.c_index - 1] = 1.0
                    lo, hi = pcamod.eigenvector_ci(res, i, cvec, level)
                    true = float(truth.vectors[t.c_index - 1, i])
                    pivot[j] = pcamod.eigenvector_pivot(res, i, cvec, truth.vectors[:, i])
                    theory[j] = res.vec_tau
            hit[j] = int(lo <= true <= hi)
            width[j] = hi - lo
        except SketchInfError:
            hit[j] = -1
    return hit, width, pivot, theory


def _run_trial(truth, cfg, family, m, t) -> TrialOutcome:
    seed = child_seed(cfg.seed, family, m, t)
    k = len(cfg.targets)
    try:
        spec = parse_family(family, m, seed, method=cfg.method)
        y = truth.data.y
        sk = apply_sketch(spec, truth.data.X, y=y)
    except SketchInfError:
        return TrialOutcome(np.full(k, -1, dtype=np.int8), np.full(k, np.nan), np.full(k, np.nan), np.full(k, np.nan))
    return TrialOutcome(*_evaluate(sk, truth, cfg.targets, cfg.level, cfg.estimator))


def _workers(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, int(threads))


def run_cells(cfg: ExperimentConfig, threads: int = 1, truth: Optional[GroundTruth] = None):
    """Run every trial of every ``(family, m)`` cell.

    Returns ``(truth, {(family, m): list[TrialOutcome]})`` ordered by trial.
    """
    if truth is None:
        truth = GroundTruth.from_data(load_data(cfg.data))
    _check_cell_inputs(cfg, truth)
    out = {}
    nw = _workers(threads)
    for fam in cfg.families:
        for m in cfg.m_grid:
            if nw == 1:
                res = [_run_trial(truth, cfg, fam, m, t) for t in range(cfg.trials)]
            else:
                with ThreadPoolExecutor(max_workers=nw) as ex:
                    res = list(ex.map(lambda t: _run_trial(truth, cfg, fam, m, t), range(cfg.trials)))
            out[(fam, m)] = res
    return truth, out


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageRow:
    family: str
    m: int
    target: str
    hits: int
    trials: int
    coverage: float
    cp_lower: float
    cp_upper: float
    mean_width: float
    failures: int


@dataclass
class CoverageReport:
    rows: list
    meta: dict = field(default_factory=dict)

    def row(self, family: str, m: int, target: str) -> CoverageRow:
        for r in self.rows:
            if r.family == family and r.m == m and r.target == target:
                return r
        raise KeyError((family, m, target))


def _coverage_rows(cfg, cells, level_cp: float = 0.95):
    rows = []
    for (fam, m), outcomes in cells.items():
        hits = np.stack([o.hit for o in outcomes])
        widths = np.stack([o.width for o in outcomes])
        for j, t in enumerate(cfg.targets):
            h = hits[:, j]
            ok = h >= 0
            used = int(ok.sum())
            nh = int((h == 1).sum())
            if used:
                cp = clopper_pearson(nh, used, level_cp)
                lo, hi, cov = cp.lower, cp.upper, nh / used
                mw = float(np.mean(widths[ok, j]))
            else:
                lo = hi = cov = mw = float("nan")
            rows.append(CoverageRow(fam, m, t.label, nh, cfg.trials, cov, lo, hi, mw, cfg.trials - used))
    return rows


def config_meta(cfg: ExperimentConfig) -> dict:
    data = cfg.data
    if isinstance(data, CaseConfig):
        dmeta = {"case": data.case, "n": data.n, "p": data.p, "seed": data.seed}
    elif isinstance(data, CsvSource):
        dmeta = {"csv": data.path, "y_col": data.y_col, "has_header": data.has_header}
    else:
        dmeta = {"matrix": [data.n, data.p]}
    return {
        "data": dmeta, "families": list(cfg.families), "m_grid": list(cfg.m_grid),
        "targets": [t.label for t in cfg.targets], "trials": cfg.trials, "level": cfg.level,
        "seed": cfg.seed, "method": cfg.method, "estimator": cfg.estimator,
    }


def run_coverage(cfg: ExperimentConfig, threads: int = 1) -> CoverageReport:
    """Empirical coverage of nominal ``cfg.level`` intervals per cell and
    target, with 95% Clopper-Pearson bands. Failed trials are excluded from
    the denominator and counted separately."""
    _, cells = run_cells(cfg, threads)
    return CoverageReport(_coverage_rows(cfg, cells), config_meta(cfg))


# ---------------------------------------------------------------------------
# variance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceRow:
    family: str
    m: int
    target: str
    variance: float
    theory: float
    ratio: float
    used: int
    failures: int


@dataclass(frozen=True)
class TrendRow:
    family: str
    target: str
    slope: float
    intercept: float
    r2: float


@dataclass
class VarianceReport:
    rows: list
    trends: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def row(self, family: str, m: int, target: str) -> VarianceRow:
        for r in self.rows:
            if r.family == family and r.m == m and r.target == target:
                return r
        raise KeyError((family, m, target))

    def trend(self, family: str, target: str) -> TrendRow:
        for r in self.trends:
            if r.family == family and r.target == target:
                return r
        raise KeyError((family, target))


def linear_fit(x, y):
    """Least-squares line ``y ~ a + b x``; returns ``(slope, intercept, r2)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.column_stack([np.ones_like(x), x])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    resid = y - A @ coef
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else float("nan")
    return float(coef[1]), float(coef[0]), r2


def _variance_rows(cfg, cells, n):
    rows = []
    for (fam, m), outcomes in cells.items():
        piv = np.stack([o.pivot for o in outcomes])
        th = np.stack([o.theory for o in outcomes])
        for j, t in enumerate(cfg.targets):
            ok = np.isfinite(piv[:, j])
            used = int(ok.sum())
            var = float(np.var(piv[ok, j], ddof=1)) if used > 1 else float("nan")
            theory = float(np.mean(th[ok, j])) if used else float("nan")
            rows.append(VarianceRow(fam, m, t.label, var, theory, var / theory if used else float("nan"),
                                    used, cfg.trials - used))
    trends = []
    if len(cfg.m_grid) >= 3:
        for fam in cfg.families:
            if parse_family(fam).family not in ("srht", "haar"):
                continue
            for t in cfg.targets:
                sel = [r for r in rows if r.family == fam and r.target == t.label]
                x = [1.0 - r.m / n for r in sel]
                y = [r.variance for r in sel]
                if all(np.isfinite(y)):
                    trends.append(TrendRow(fam, t.label, *linear_fit(x, y)))
    return rows, trends


def run_variance(cfg: ExperimentConfig, threads: int = 1) -> VarianceReport:
    """Empirical variance of the standardized pivots against their predicted
    values; for SRHT and Haar also the fit of variance on ``1 - m/n``."""
    truth, cells = run_cells(cfg, threads)
    rows, trends = _variance_rows(cfg, cells, truth.data.n)
    return VarianceReport(rows, trends, config_meta(cfg))


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QfCltReport:
    family: str
    n: int
    m: int
    pair: str
    trials: int
    inner: float
    variance: float
    theory: float
    ratio: float
    ks_d: float
    ks_p: float
    distinct: int
    frac_zero: float


def qf_theory(spec, a: np.ndarray, b: np.ndarray) -> float:
    """Limiting variance of ``sqrt(m/tau) (a^T S^T S b - a^T b)``."""
    ip = float(a @ b)
    fam = spec.family
    if fam == "srht":
        return 1.0 + 2.0 * ip ** 2
    if fam == "subsample":
        return float(a.shape[0] * np.sum(a * a * b * b))
    if fam == "iid" and not spec.dist.is_gaussian:
        return 1.0 + ip ** 2 + (spec.dist.kappa4 - 3.0) * float(np.sum(a * a * b * b))
    return 1.0 + ip ** 2


def run_qf_clt(family: str, n: int, m: int, pair_style: str = "delocalized", trials: int = 5000,
               seed: int = 0, method: str = "gram", theta: Optional[float] = None,
               pair: Optional[tuple] = None) -> QfCltReport:
    """Sample ``sqrt(m/tau) (a^T S^T S b - a^T b)`` over independent sketches.

    ``variance`` is the empirical variance of that statistic and ``theory``
    its predicted limit; the KS test is run on the statistic divided by
    ``sqrt(theory)``.
    """
    if trials < 1000:
        raise ConfigInvalid(f"qf-clt needs at least 1000 trials, got {trials}")
    if pair is None:
        a, b = gen_unit_pair(pair_style, n, seed=seed, theta=theta)
    else:
        a, b = (np.asarray(v, dtype=np.float64) for v in pair)
    Z = np.column_stack([a, b])
    ip = float(a @ b)
    spec0 = parse_family(family, m, 0, method=method)
    stats_ = np.empty(trials)
    tau = None
    for t in range(trials):
        spec = parse_family(family, m, child_seed(seed, "qf", family, m, t), method=method)
        sk = apply_sketch(spec, Z)
        tau = sk.tau
        stats_[t] = float(sk.Xs[:, 0] @ sk.Xs[:, 1]) - ip
    scaled = math.sqrt(m / tau) * stats_
    theory = qf_theory(spec0, a, b)
    var = float(np.var(scaled, ddof=1))
    d, pval = ks_statistic(scaled / math.sqrt(theory))
    return QfCltReport(
        family=family, n=n, m=m, pair=pair_style if pair is None else "custom", trials=trials, inner=ip,
        variance=var, theory=theory, ratio=var / theory, ks_d=d, ks_p=pval,
        distinct=int(np.unique(stats_).size), frac_zero=float(np.mean(np.abs(stats_) <= 1e-12)),
    )


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    family: str
    m: int
    median_s: float
    min_s: float
    reps: int


def run_bench(families: Sequence[str] = ("countsketch", "sse:8", "srht", "gaussian"), n: int = 2048,
              p: int = 15, m_grid: Sequence[int] = (200, 400, 600, 800, 1000, 1200, 1400, 1600),
              reps: int = 20, seed: int = 0) -> list:
    """Median wall time of building one sketch of Case-1 data (with ``y``).

    Families are timed round-robin within each repetition so that drift in
    machine load affects all of them alike.
    """
    data = gen_case1(n, p, seed)
    for fam in families:
        apply_sketch(parse_family(fam, m_grid[0], seed), data.X, y=data.y)  # JIT and cache warm-up
    rows = []
    for m in m_grid:
        times = {fam: [] for fam in families}
        for r in range(max(reps, 1)):
            for fam in families:
                spec = parse_family(fam, m, child_seed(seed, "bench", fam, m, r))
                t0 = time.perf_counter()
                apply_sketch(spec, data.X, y=data.y)
                times[fam].append(time.perf_counter() - t0)
        for fam in families:
            ts = times[fam]
            rows.append(BenchRow(fam, m, float(np.median(ts)), float(np.min(ts)), len(ts)))
    rows.sort(key=lambda r: (families.index(r.family), r.m))
    return rows


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

LEVERAGE_FLAG = 10.0  # max leverage score vs its average p/n
L4_FLAG = 5.0  # ||vec U||_4^4 vs the delocalized value 3p/n
RESID_FLAG = 10.0  # max |r_i| / ||r|| vs 1/sqrt(n)


def delocalization_report(X, y=None) -> dict:
    """Advisory delocalization diagnostics for the full data.

    Thresholds are heuristics: a flag means the corresponding family's
    asymptotic conditions look doubtful, not that they provably fail.
    """
    data = X if isinstance(X, DataMatrix) else DataMatrix(X, y)
    if y is None:
        y = data.y
    n, p = data.n, data.p
    U = thin_svd(data.X).U
    rows2 = np.sum(U * U, axis=1)
    max_lev = float(np.sqrt(rows2.max()))
    l4 = float(np.sum(U ** 4))
    out = {
        "n": n, "p": p, "max_leverage": max_lev, "mean_leverage_score": p / n,
        "l4_mass": l4, "l4_reference": 3.0 * p / n,
        "max_normalized_residual": None, "max_normalized_fitted": None, "flags": {},
    }
    flags = {}
    lev_bad = rows2.max() > LEVERAGE_FLAG * p / n
    l4_bad = l4 > L4_FLAG * 3.0 * p / n
    if lev_bad:
        for fam in ("srht", "subsample"):
            flags.setdefault(fam, []).append("max leverage score far above p/n")
    if l4_bad:
        flags.setdefault("sse", []).append("l4 mass of U far above 3p/n")
    if y is not None:
        beta = solve_ls(data.X, y)
        fit = data.X @ beta
        res = np.asarray(y) - fit
        rn, fn = float(np.linalg.norm(res)), float(np.linalg.norm(fit))
        if rn > 0:
            out["max_normalized_residual"] = float(np.max(np.abs(res)) / rn)
            if out["max_normalized_residual"] > RESID_FLAG / math.sqrt(n):
                for fam in ("srht", "subsample"):
                    flags.setdefault(fam, []).append("residual is localized")
        if fn > 0:
            out["max_normalized_fitted"] = float(np.max(np.abs(fit)) / fn)
    out["flags"] = flags
    return out
