"""Command-line entry point: ``sketchinf <subcommand> ...``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical error.
Errors are printed to stderr as a single line ``error[CODE]: message``.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys

import numpy as np

from . import __version__
from . import harness, io
from .datagen import CaseConfig
from .errors import ConfigInvalid, SketchInfError
from .linalg import DataMatrix
from .ls import ls_confidence_intervals, ls_infer
from .pca import eigenvalue_ci, eigenvector_ci, pca_infer
from .sketch import apply_sketch, parse_family


def _common(p: argparse.ArgumentParser, seed_required: bool = True):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--threads", type=int, default=1, help="worker threads; 0 means auto")
    p.add_argument("--no-meta", action="store_true", help="omit the metadata header")


def _data_args(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--csv", help="numeric CSV file")
    g.add_argument("--case", type=int, choices=(1, 2, 3), help="synthetic simulation case")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.add_argument("--y-col", default=None, help="response column (0-based index or 'last')")
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--p", type=int, default=15)
    p.add_argument("--data-seed", type=int, default=None, help="seed for synthetic data (default --seed)")


def _sketch_args(p: argparse.ArgumentParser):
    p.add_argument("--family", required=True,
                   help="srht, countsketch, sse, sse:ZETA, gaussian, iid_t:DF, haar, subsample")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--method", choices=("explicit", "gram"), default="explicit",
                   help="construction route for gaussian and haar sketches")
    p.add_argument("--level", type=float, default=0.95)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sketchinf", description="Inference for sketched least squares and PCA.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sketch", help="sketch a data matrix and print the sketched rows")
    _data_args(p), _sketch_args(p), _common(p)

    p = sub.add_parser("ls", help="sketched least squares with confidence intervals")
    _data_args(p), _sketch_args(p), _common(p)
    p.add_argument("--kind", choices=("complete", "partial"), default="complete")
    p.add_argument("--estimator", choices=("auto", "simple", "sandwich"), default="auto")

    p = sub.add_parser("pca", help="sketched PCA with eigenvalue / eigenvector intervals")
    _data_args(p), _sketch_args(p), _common(p)
    p.add_argument("--oracle", action="store_true", help="use full-data U for data-dependent variances")
    p.add_argument("--c-index", type=int, default=1, help="eigenvector direction c = e_K (1-based)")

    for name, hlp in (("mc-coverage", "Monte Carlo CI coverage"), ("mc-variance", "Monte Carlo pivot variances")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="JSON experiment config")
        _common(p, seed_required=False)

    p = sub.add_parser("qf-clt", help="quadratic-form CLT check for one family")
    p.add_argument("--family", required=True)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--pair", default="delocalized",
                   choices=("delocalized", "delocalized_same", "flat", "localized", "angle", "srht_counter"))
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--trials", type=int, default=5000)
    p.add_argument("--method", choices=("explicit", "gram"), default="gram")
    _common(p)

    p = sub.add_parser("bench", help="time sketch construction per family")
    p.add_argument("--families", default="countsketch,sse:8,srht,gaussian")
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--p", type=int, default=15)
    p.add_argument("--m-grid", default="200,400,600,800,1000,1200,1400,1600")
    p.add_argument("--reps", type=int, default=20)
    _common(p)

    p = sub.add_parser("diagnose", help="delocalization diagnostics for a data set")
    _data_args(p)
    _common(p, seed_required=False)
    return ap


def _load(args) -> DataMatrix:
    if args.csv:
        y_col = args.y_col
        if y_col is not None and y_col != "last":
            y_col = int(y_col)
        return io.load_csv(args.csv, has_header=args.header, y_col=y_col)
    seed = args.data_seed if args.data_seed is not None else args.seed
    if seed is None:
        raise ConfigInvalid("--seed (or --data-seed) is required for synthetic data")
    return CaseConfig(args.case, args.n, args.p, seed).generate()


def _meta(args) -> dict | None:
    if args.no_meta:
        return None
    return {
        "version": __version__,
        "command": args.command,
        "argv": sys.argv[1:],
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _cmd_sketch(args):
    data = _load(args)
    sk = apply_sketch(parse_family(args.family, args.m, args.seed, args.method), data.X, y=data.y)
    if args.format == "json":
        return {"family": sk.family, "m": sk.m_nominal, "m_eff": sk.m_eff, "n": sk.n, "gamma": sk.gamma,
                "tau": sk.tau, "alpha": sk.alpha, "Xs": sk.Xs, "ys": sk.ys}
    cols = [f"x{j + 1}" for j in range(sk.p)] + (["y"] if sk.ys is not None else [])
    M = sk.Xs if sk.ys is None else np.column_stack([sk.Xs, sk.ys])
    return {"columns": cols, "rows": M.tolist()}


def _cmd_ls(args):
    data = _load(args)
    if data.y is None:
        raise ConfigInvalid("least squares needs a response column (--y-col)")
    sk = apply_sketch(parse_family(args.family, args.m, args.seed, args.method), data.X, y=data.y)
    res = ls_infer(sk, args.kind, xty=data.X.T @ data.y, level=args.level, estimator=args.estimator)
    ci = ls_confidence_intervals(res, args.level)
    rows = [[j + 1, res.beta_hat[j], ci[j, 0], ci[j, 1], np.sqrt(res.scale * res.sigma_hat[j, j])]
            for j in range(sk.p)]
    return {"columns": ["coef", "estimate", "lower", "upper", "std_error"], "rows": rows}


def _cmd_pca(args):
    data = _load(args)
    sk = apply_sketch(parse_family(args.family, args.m, args.seed, args.method), data.X, y=None)
    U = None
    if args.oracle:
        from .linalg import thin_svd

        U = thin_svd(data.X).U
    res = pca_infer(sk, U_full=U, mode="oracle" if args.oracle else "auto", level=args.level)
    p = sk.p
    c = np.zeros(p)
    c[args.c_index - 1] = 1.0
    rows = []
    for i in range(p):
        lo, hi = eigenvalue_ci(res, i)
        rows.append([i + 1, "eigenvalue", res.lambdas_hat[i], lo, hi])
        try:
            vlo, vhi = eigenvector_ci(res, i, c)
            rows.append([i + 1, f"eigvec_c{args.c_index}", float(c @ res.vectors_hat[:, i]), vlo, vhi])
        except SketchInfError as exc:
            rows.append([i + 1, f"eigvec_c{args.c_index}", float(c @ res.vectors_hat[:, i]), f"n/a ({exc.code})", ""])
    return {"columns": ["index", "target", "estimate", "lower", "upper"], "rows": rows}


def _config_with_seed(args):
    cfg = io.parse_config(args.config)
    if args.seed is not None and args.seed != cfg.seed:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    return cfg


def _cmd_coverage(args):
    return harness.run_coverage(_config_with_seed(args), threads=args.threads)


def _cmd_variance(args):
    return harness.run_variance(_config_with_seed(args), threads=args.threads)


def _cmd_qf(args):
    return harness.run_qf_clt(args.family, args.n, args.m, args.pair, args.trials, seed=args.seed,
                              method=args.method, theta=args.theta)


def _cmd_bench(args):
    fams = [f.strip() for f in args.families.split(",") if f.strip()]
    grid = [int(v) for v in args.m_grid.split(",") if v.strip()]
    return harness.run_bench(fams, args.n, args.p, grid, args.reps, seed=args.seed)


def _cmd_diagnose(args):
    data = _load(args)
    rep = harness.delocalization_report(data)
    if args.format == "csv":
        rep = dict(rep)
        rep["flags"] = ";".join(f"{k}:{'|'.join(v)}" for k, v in sorted(rep["flags"].items()))
    return rep


COMMANDS = {
    "sketch": _cmd_sketch, "ls": _cmd_ls, "pca": _cmd_pca, "mc-coverage": _cmd_coverage,
    "mc-variance": _cmd_variance, "qf-clt": _cmd_qf, "bench": _cmd_bench, "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = COMMANDS[args.command](args)
        io.emit_report(report, args.format, args.out, meta=_meta(args))
    except SketchInfError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error[{exc.code}]: {msg}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error[E_NUMERIC]: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
