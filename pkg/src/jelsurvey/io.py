"""CSV exchange formats and the weighted-file analysis entry point."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .designs import FinitePopulation, SurveySample
from .errors import SchemaError
from .inference import (
    JEL_METHODS,
    METHODS,
    ConfidenceInterval,
    ProfileRatio,
    confidence_interval,
    design_effect,
)
from .ustat import get_kernel, jackknife_pseudo_values

POPULATION_HEADER = ["unit", "y", "x", "pi"]
SAMPLE_HEADER = ["unit", "y", "x", "pi", "d", "w"]


def _fmt(v: float) -> str:
    return repr(float(v))


def read_table(path) -> dict:
    """Read a headed, comma-separated UTF-8 file into ``{column: list of str}``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise SchemaError(f"{path}: missing header row")
            header = [h.strip() for h in header]
            if len(set(header)) != len(header):
                raise SchemaError(f"{path}: duplicate column names")
            cols = {h: [] for h in header}
            for lineno, rec in enumerate(reader, 2):
                if not rec:
                    continue
                if len(rec) != len(header):
                    raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
                for h, v in zip(header, rec):
                    cols[h].append(v.strip())
    except UnicodeDecodeError as exc:
        raise SchemaError(f"{path}: not UTF-8 ({exc})") from None
    return cols


def _column(cols: dict, name: str, path) -> np.ndarray:
    if name not in cols:
        raise SchemaError(f"{path}: column {name!r} not found (have {', '.join(cols)})")
    try:
        arr = np.array([float(v) for v in cols[name]], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: column {name!r} is not numeric ({exc})") from None
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{path}: column {name!r} has missing or non-finite values")
    return arr


def write_population_csv(path_or_file, pop: FinitePopulation, pi=None):
    """Write ``unit,y,x,pi``; ``pi`` defaults to an empty column."""
    rows = [[str(i), _fmt(pop.y[i]), _fmt(pop.x[i]), "" if pi is None else _fmt(pi[i])] for i in range(pop.N)]
    _write(path_or_file, POPULATION_HEADER, rows)


def read_population_csv(path):
    """Return ``(population, pi)``; ``pi`` is ``None`` when the column is blank."""
    cols = read_table(path)
    if list(cols)[:3] != POPULATION_HEADER[:3]:
        raise SchemaError(f"{path}: population header must be {','.join(POPULATION_HEADER)}")
    y, x = _column(cols, "y", path), _column(cols, "x", path)
    pi = None
    if "pi" in cols and all(cols["pi"]):
        pi = _column(cols, "pi", path)
    return FinitePopulation(y, x), pi


def write_sample_csv(path_or_file, sample: SurveySample):
    has_w = sample.w is not None
    header = SAMPLE_HEADER if has_w else SAMPLE_HEADER[:-1]
    units = sample.indices if sample.indices is not None else range(sample.n)
    rows = []
    for k, unit in enumerate(units):
        row = [str(int(unit)), _fmt(sample.y[k]), _fmt(sample.x[k]), _fmt(sample.pi[k]), _fmt(sample.d[k])]
        if has_w:
            row.append(_fmt(sample.w[k]))
        rows.append(row)
    _write(path_or_file, header, rows)


def read_sample_csv(path) -> SurveySample:
    cols = read_table(path)
    missing = [h for h in SAMPLE_HEADER[:-1] if h not in cols]
    if missing:
        raise SchemaError(f"{path}: missing sample columns {missing}")
    w = _column(cols, "w", path) if "w" in cols else None
    units = np.array([int(u) for u in cols["unit"]])
    return SurveySample(_column(cols, "y", path), _column(cols, "pi", path), _column(cols, "x", path), w, units)


def _write(path_or_file, header, rows):
    if hasattr(path_or_file, "write"):
        writer = csv.writer(path_or_file, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
        _write(fh, header, rows)


@dataclass(frozen=True)
class AnalysisResult:
    ci: ConfidenceInterval
    n: int
    t_n: float
    deff: float
    n_eff: float

    def format(self) -> str:
        c = self.ci
        return "\n".join([
            f"method: {c.method}",
            f"level: {c.level:g}",
            f"n: {self.n}",
            f"u_statistic: {self.t_n:.6f}",
            f"point: {c.point:.6f}",
            f"interval: ({c.lower:.3f},{c.upper:.3f})",
            f"lower: {c.lower:.8f}",
            f"upper: {c.upper:.8f}",
            f"deff: {self.deff:.6f}",
            f"n_eff: {self.n_eff:.3f}",
        ] + (["degenerate: true"] if c.diagnostics.get("degenerate") else [])) + "\n"


def analyze_file(path, y_column: str, d_column: str, w_column: Optional[str] = None,
                 x_columns: Optional[Sequence[str]] = None, x_bar: Optional[Sequence[float]] = None,
                 kernel_name: str = "variance", method: str = "JEL", level: float = 0.95) -> AnalysisResult:
    """Interval for a U-statistic parameter from a weighted survey file.

    ``d_column`` holds design weights ``1/pi``. ``JEL_w`` needs ``w_column``;
    ``JEL_d`` needs ``x_columns`` together with their population means ``x_bar``.
    """
    if method not in METHODS:
        raise SchemaError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    kernel = get_kernel(kernel_name)
    cols = read_table(path)
    y = _column(cols, y_column, path)
    d = _column(cols, d_column, path)
    if np.any(d <= 0):
        raise SchemaError(f"{path}: design weights must be positive")
    if method == "JEL_w" and w_column is None:
        raise SchemaError("method JEL_w needs a calibration weight column (--w)")
    w = _column(cols, w_column, path) if w_column else None
    if w is not None and np.any(w <= 0):
        raise SchemaError(f"{path}: calibration weights must be positive")
    x_columns = list(x_columns or [])
    if x_columns and (x_bar is None or len(x_bar) != len(x_columns)):
        raise SchemaError("give one population mean (--xbar) per auxiliary column (--x)")
    if method == "JEL_d" and not x_columns:
        raise SchemaError("method JEL_d needs auxiliary columns (--x) and their population means (--xbar)")
    x = None
    if x_columns:
        x = np.column_stack([_column(cols, c, path) for c in x_columns])
        if x.shape[1] == 1:
            x = x[:, 0]
    xb = None if x is None else (float(x_bar[0]) if len(x_bar) == 1 else np.asarray(x_bar, dtype=float))

    # Weights only enter through their normalized form, so 1/pi need not be <= 1 after rescaling.
    pi = 1.0 / d
    if pi.max() > 1.0:
        pi = pi / pi.max()
    sample = SurveySample(y, pi, x, w)
    pv = jackknife_pseudo_values(y, kernel)
    ci = confidence_interval(sample, pv, method, level, xb)
    if ci.diagnostics.get("degenerate"):
        # zero-width interval at T_n: no spread, so no design effect either
        return AnalysisResult(ci, sample.n, pv.t_n, float("nan"), float("nan"))
    if method in JEL_METHODS:
        summary = ProfileRatio(sample, pv, method, xb).summary
    else:
        summary = design_effect(sample, pv, "H")
    return AnalysisResult(ci, sample.n, pv.t_n, summary.deff, summary.n_eff)
