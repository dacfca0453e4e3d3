"""CSV ingestion, JSON experiment configs and report emission."""

from __future__ import annotations

import csv
import io as _io
import json
import math
import sys
from dataclasses import asdict, fields, is_dataclass
from typing import Optional

import numpy as np

from .datagen import CaseConfig
from .errors import (
    ConfigInvalid,
    IoError,
    NonNumericCell,
    ParseError,
    RaggedRows,
    SchemaError,
)
from .linalg import DataMatrix

CONFIG_KEYS = {"data", "families", "m_grid", "trials", "targets", "level", "seed", "method", "estimator"}
ALLOWED_FAMILIES = "srht, countsketch, sse, sse:ZETA, gaussian, iid_t:DF, haar, subsample"

COVERAGE_COLUMNS = ("family", "m", "target", "hits", "trials", "coverage", "cp_lower", "cp_upper",
                    "mean_width", "failures")


# ---------------------------------------------------------------------------
# CSV input
# ---------------------------------------------------------------------------

def load_csv(path, has_header: bool = False, y_col=None) -> DataMatrix:
    """Read a rectangular numeric CSV into a :class:`DataMatrix`.

    ``y_col`` selects the response column (0-based int, negative ints count
    from the end, or ``"last"``). Errors report 1-based row/column numbers.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return parse_csv_text(text, has_header=has_header, y_col=y_col)


def parse_csv_text(text: str, has_header: bool = False, y_col=None) -> DataMatrix:
    reader = csv.reader(_io.StringIO(text))
    rows = []
    width = None
    for lineno, rec in enumerate(reader, start=1):
        if not rec or all(not c.strip() for c in rec):
            continue
        if has_header and lineno == 1:
            continue
        if width is None:
            width = len(rec)
        elif len(rec) != width:
            raise RaggedRows(f"expected {width} columns, found {len(rec)}", row=lineno)
        vals = []
        for j, cell in enumerate(rec, start=1):
            try:
                v = float(cell.strip())
            except ValueError:
                raise NonNumericCell(f"non-numeric cell {cell!r}", row=lineno, col=j) from None
            if not math.isfinite(v):
                raise NonNumericCell(f"non-finite cell {cell!r}", row=lineno, col=j)
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise ParseError("no data rows")
    A = np.array(rows, dtype=np.float64)
    if y_col is None:
        return DataMatrix(A)
    j = A.shape[1] - 1 if y_col == "last" else int(y_col)
    if j < 0:
        j += A.shape[1]
    if not (0 <= j < A.shape[1]):
        raise ParseError(f"y column {y_col} out of range for {A.shape[1]} columns")
    X = np.delete(A, j, axis=1)
    return DataMatrix(X, A[:, j])


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def _data_source(d, seed):
    from .harness import CsvSource

    if isinstance(d, str):
        return CsvSource(d)
    if not isinstance(d, dict):
        raise SchemaError("key 'data' must be an object or a CSV path")
    if "csv" in d:
        unknown = set(d) - {"csv", "y_col", "has_header"}
        if unknown:
            raise SchemaError(f"unknown key(s) in 'data': {sorted(unknown)}")
        return CsvSource(str(d["csv"]), d.get("y_col"), bool(d.get("has_header", False)))
    if "case" in d:
        unknown = set(d) - {"case", "n", "p", "seed", "t", "noise_sd"}
        if unknown:
            raise SchemaError(f"unknown key(s) in 'data': {sorted(unknown)}")
        try:
            return CaseConfig(int(d["case"]), int(d["n"]), int(d["p"]), int(d.get("seed", seed)),
                              float(d.get("t", 0.1)), float(d.get("noise_sd", 0.01)))
        except KeyError as exc:
            raise SchemaError(f"key 'data.{exc.args[0]}' is required for case data") from None
    raise SchemaError("key 'data' needs either 'case' or 'csv'")


def config_from_dict(raw: dict):
    """Validate a config mapping and build an ``ExperimentConfig``."""
    from .harness import ExperimentConfig, parse_target
    from .sketch import parse_family

    if not isinstance(raw, dict):
        raise SchemaError("config must be a JSON object")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise SchemaError(f"unknown key(s): {sorted(unknown)}")
    for key in ("data", "families", "m_grid", "targets", "seed"):
        if key not in raw:
            raise SchemaError(f"missing required key '{key}'")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SchemaError("key 'seed' must be an integer")
    data = _data_source(raw["data"], seed)
    fams = raw["families"]
    if not isinstance(fams, list) or not fams:
        raise SchemaError("key 'families' must be a non-empty list")
    for f in fams:
        try:
            parse_family(str(f))
        except ConfigInvalid:
            raise SchemaError(f"key 'families': unknown family {f!r}; allowed: {ALLOWED_FAMILIES}") from None
    m_grid = raw["m_grid"]
    if not isinstance(m_grid, list) or not all(isinstance(m, int) for m in m_grid):
        raise SchemaError("key 'm_grid' must be a list of integers")
    if isinstance(data, CaseConfig):
        for m in m_grid:
            if not (data.p < m < data.n):
                raise SchemaError(f"key 'm_grid': {m} must lie strictly between p={data.p} and n={data.n}")
    targets = raw["targets"]
    if not isinstance(targets, list) or not targets:
        raise SchemaError("key 'targets' must be a non-empty list")
    try:
        parsed = [parse_target(str(t)) for t in targets]
    except ConfigInvalid as exc:
        raise SchemaError(f"key 'targets': {exc}") from None
    trials = raw.get("trials", 500)
    level = raw.get("level", 0.95)
    method = raw.get("method", "explicit")
    if method not in ("explicit", "gram"):
        raise SchemaError("key 'method' must be 'explicit' or 'gram'")
    estimator = raw.get("estimator", "auto")
    if estimator not in ("auto", "simple", "sandwich"):
        raise SchemaError("key 'estimator' must be auto, simple or sandwich")
    try:
        return ExperimentConfig(data=data, families=[str(f) for f in fams], m_grid=m_grid, targets=parsed,
                                seed=seed, trials=int(trials), level=float(level), method=method,
                                estimator=estimator)
    except ConfigInvalid as exc:
        raise SchemaError(str(exc)) from None


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def fmt_number(v) -> str:
    """Shortest round-trip decimal text for floats; plain text for ints."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        return repr(f)
    if v is None:
        return ""
    return str(v)


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return None if not math.isfinite(f) else f
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _table(report):
    """``(columns, rows)`` for CSV emission."""
    from .harness import CoverageReport, VarianceReport

    if isinstance(report, CoverageReport):
        return COVERAGE_COLUMNS, [[getattr(r, c) for c in COVERAGE_COLUMNS] for r in report.rows]
    if isinstance(report, VarianceReport):
        cols = ("family", "m", "target", "variance", "theory", "ratio", "used", "failures")
        return cols, [[getattr(r, c) for c in cols] for r in report.rows]
    if isinstance(report, list) and report and is_dataclass(report[0]):
        cols = tuple(f.name for f in fields(report[0]))
        return cols, [[getattr(r, c) for c in cols] for r in report]
    if is_dataclass(report):
        d = asdict(report)
        cols = tuple(k for k, v in d.items() if not isinstance(v, (list, dict, np.ndarray)))
        return cols, [[d[c] for c in cols]]
    if isinstance(report, dict) and "columns" in report and "rows" in report:
        return tuple(report["columns"]), report["rows"]
    if isinstance(report, dict):
        cols = tuple(k for k, v in report.items() if not isinstance(v, (list, dict, np.ndarray)))
        return cols, [[report[c] for c in cols]]
    raise IoError(f"cannot emit object of type {type(report).__name__} as CSV")


def render_report(report, fmt: str = "csv", meta: Optional[dict] = None) -> str:
    if fmt == "json":
        body = _jsonable(report)
        if not isinstance(body, dict):
            body = {"rows": body}
        if meta is not None:
            rest = {k: v for k, v in body.items() if k != "meta"}
            if "meta" in body:
                meta = {**meta, "config": body["meta"]}
            body = {"meta": _jsonable(meta), **rest}
        return json.dumps(body, indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise IoError(f"unknown format {fmt!r}")
    cols, rows = _table(report)
    buf = _io.StringIO()
    if meta is not None:
        cfg = getattr(report, "meta", None)
        if cfg:
            meta = {**meta, "config": cfg}
        buf.write("# " + json.dumps(_jsonable(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([fmt_number(v) for v in r])
    return buf.getvalue()


def emit_report(report, fmt: str = "csv", path=None, meta: Optional[dict] = None) -> None:
    """Write ``report`` as CSV or JSON to ``path`` (stdout when ``None``)."""
    text = render_report(report, fmt, meta)
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
