"""Monte Carlo coverage experiments and their tabular reports."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .designs import (
    FinitePopulation,
    SurveySample,
    calibration_weights,
    generate_population,
    inclusion_probabilities,
    make_rng,
    pps_draw,
)
from .errors import ConfigError, JELError
from .inference import (
    JEL_METHODS,
    METHODS,
    ProfileRatio,
    confidence_interval,
    greg_estimate,
    hajek_estimate,
)
from .ustat import KERNELS, jackknife_pseudo_values, population_u_statistic

# Stream tags passed to make_rng after the master seed.
_POPULATION_STREAM = 0
_REPLICATE_STREAM = 1

DEFAULT_SHIFT = 4.0
# size measure for pi: proportional to x, or equal probabilities
SIZE_VARS = ("x", "uniform")


@dataclass(frozen=True)
class SimulationConfig:
    N: int = 1000
    n_list: tuple = (100, 150)
    rho_list: tuple = (0.3, 0.5)
    beta0: float = 1.0
    beta1: float = 1.0
    shift: float = DEFAULT_SHIFT
    B_reps: int = 1000
    level: float = 0.95
    kernel_name: str = "pwm"
    methods: tuple = METHODS
    master_seed: int = 12345
    deff_mode: str = "estimated"
    size_var: str = "x"

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(v) for v in self.n_list))
        object.__setattr__(self, "rho_list", tuple(float(v) for v in self.rho_list))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.n_list or not self.rho_list:
            raise ConfigError("n_list and rho_list must not be empty")
        if self.N < max(self.n_list):
            raise ConfigError(f"N={self.N} is smaller than the largest sample size {max(self.n_list)}")
        if min(self.n_list) < 3:
            raise ConfigError("sample sizes must be at least 3")
        if self.B_reps < 1:
            raise ConfigError("B_reps must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if any(not 0.0 < r < 1.0 for r in self.rho_list):
            raise ConfigError("every rho must lie in (0, 1)")
        if self.kernel_name not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel_name!r}; choose from {sorted(KERNELS)}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or len(set(self.methods)) != len(self.methods):
            raise ConfigError(f"methods must be distinct tags from {METHODS}, got {self.methods}")
        if self.deff_mode not in ("estimated", "monte_carlo"):
            raise ConfigError("deff_mode must be 'estimated' or 'monte_carlo'")
        if self.shift < 0:
            raise ConfigError("shift must be non-negative")
        if self.size_var not in SIZE_VARS:
            raise ConfigError(f"size_var must be one of {SIZE_VARS}, got {self.size_var!r}")

    @classmethod
    def quick(cls, **overrides) -> "SimulationConfig":
        """Preset for fast test runs: 300 replicates instead of 1000."""
        return cls(**{"B_reps": 300, **overrides})

    @classmethod
    def from_text(cls, text: str) -> "SimulationConfig":
        """Parse flat ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in kwargs:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            try:
                kwargs[key] = _parse_value(key, value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "SimulationConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(f"{f.name} = {','.join(map(str, v)) if isinstance(v, tuple) else v}")
        return "\n".join(out) + "\n"


def _parse_value(key, value):
    if key in ("N", "B_reps", "master_seed"):
        return int(value)
    if key == "n_list":
        return tuple(int(v) for v in value.split(",") if v.strip())
    if key == "rho_list":
        return tuple(float(v) for v in value.split(",") if v.strip())
    if key == "methods":
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if key in ("beta0", "beta1", "shift", "level"):
        return float(value)
    return value


@dataclass
class CellResult:
    """Tallies for one (rho, n, method) cell. Percentages exclude failed replicates."""

    rho: float
    n: int
    method: str
    covered: int = 0
    lower_miss: int = 0
    upper_miss: int = 0
    failed: int = 0
    sum_length: float = 0.0
    sum_lower: float = 0.0
    theta_true: float = float("nan")

    @property
    def valid(self) -> int:
        return self.covered + self.lower_miss + self.upper_miss

    def _pct(self, k):
        return 100.0 * k / self.valid if self.valid else float("nan")

    @property
    def cp(self):
        return self._pct(self.covered)

    @property
    def l(self):  # noqa: E743
        return self._pct(self.lower_miss)

    @property
    def u(self):
        return self._pct(self.upper_miss)

    @property
    def al(self):
        return self.sum_length / self.valid if self.valid else float("nan")

    @property
    def lb(self):
        return self.sum_lower / self.valid if self.valid else float("nan")


@dataclass
class SimulationReport:
    config: SimulationConfig
    cells: list = field(default_factory=list)
    # (rho, n) -> {"theta_true", "ratios": {method: array}, "lambda_sqrt_n", "quad_rel_dev"}
    diagnostics: dict = field(default_factory=dict, repr=False)

    def cell(self, rho, n, method) -> CellResult:
        for c in self.cells:
            if c.rho == rho and c.n == n and c.method == method:
                return c
        raise KeyError((rho, n, method))


@dataclass
class _Replicate:
    outcomes: dict  # method -> (code, length, lower) ; code in {"c", "l", "u", "f"}
    ratios: dict    # JEL method -> r(theta_true)
    lam_scaled: float
    quad_rel_dev: float


def _with_calibration(sample: SurveySample, x_bar) -> SurveySample:
    try:
        w = calibration_weights(sample.d, sample.x, x_bar)
    except JELError:
        return sample
    return replace(sample, w=w)


def run_replicate(pop: FinitePopulation, pi_all, theta_true, kernel, methods, level, rng,
                  v_p: Optional[dict] = None) -> _Replicate:
    """One Sampford sample and every requested interval; failures are recorded, not raised."""
    idx = pps_draw(pi_all, rng)
    sample = _with_calibration(SurveySample(pop.y[idx], pi_all[idx], pop.x[idx], None, idx), pop.x_bar)
    outcomes, ratios = {}, {}
    lam_scaled = quad_dev = float("nan")
    try:
        pv = jackknife_pseudo_values(sample.y, kernel)
    except JELError:
        return _Replicate({m: ("f", 0.0, 0.0) for m in methods}, {}, lam_scaled, quad_dev)
    v_p = v_p or {}
    for m in methods:
        try:
            ci = confidence_interval(sample, pv, m, level, pop.x_bar, v_p.get(m))
        except JELError:
            outcomes[m] = ("f", 0.0, 0.0)
            continue
        code = "c" if ci.covers(theta_true) else ("l" if theta_true < ci.lower else "u")
        outcomes[m] = (code, ci.length, ci.lower)
    for m in JEL_METHODS:
        if m not in methods:
            continue
        try:
            f = ProfileRatio(sample, pv, m, pop.x_bar, v_p.get(m))
            ratios[m] = f(theta_true)
            if m == "JEL" and np.isfinite(ratios[m]):
                lam_scaled = abs(float(f.last_solution.lam[0])) * math.sqrt(sample.n)
                quad = (f.point - theta_true) ** 2 / f.summary.v_p_hat
                quad_dev = abs(ratios[m] - quad) / max(quad, 1e-300)
        except JELError:
            ratios[m] = float("nan")
    return _Replicate(outcomes, ratios, lam_scaled, quad_dev)


def _replicate_task(args):
    pop, pi_all, theta_true, kernel, methods, level, seed_keys, v_p = args
    return run_replicate(pop, pi_all, theta_true, kernel, methods, level, make_rng(*seed_keys), v_p)


def _monte_carlo_variances(pop, pi_all, kernel, methods, reps, seed_keys):
    """Across-replicate variance of each method's point estimator (same replicate streams)."""
    points = {m: [] for m in methods if m in JEL_METHODS}
    for r in range(reps):
        rng = make_rng(*seed_keys, r)
        idx = pps_draw(pi_all, rng)
        s = _with_calibration(SurveySample(pop.y[idx], pi_all[idx], pop.x[idx], None, idx), pop.x_bar)
        try:
            pv = jackknife_pseudo_values(s.y, kernel)
        except JELError:
            continue
        for m in points:
            try:
                if m == "JEL":
                    points[m].append(hajek_estimate(s, pv))
                elif m == "JEL_d":
                    points[m].append(greg_estimate(s, pv, pop.x_bar).estimate)
                elif s.w is not None:
                    points[m].append(hajek_estimate(s, pv, "calibration"))
            except JELError:
                pass
    return {m: float(np.var(v, ddof=1)) for m, v in points.items() if len(v) > 1}


def run_simulation(config: SimulationConfig, n_jobs: int = 1) -> SimulationReport:
    """Run every (rho, n) cell of ``config``.

    One population is generated per rho and reused for every n and replicate;
    replicate ``r`` of cell ``(i, j)`` draws from stream
    ``(master_seed, 1, i, j, r)``, so the report does not depend on ``n_jobs``.
    """
    report = SimulationReport(config)
    methods = config.methods
    kernel = config.kernel_name
    pool = ProcessPoolExecutor(n_jobs) if n_jobs > 1 else None
    try:
        for i, rho in enumerate(config.rho_list):
            pop = generate_population(config.N, config.beta0, config.beta1, rho, config.shift,
                                      seed=(config.master_seed, _POPULATION_STREAM, i))
            theta_true = population_u_statistic(pop.y, kernel)
            for j, n in enumerate(config.n_list):
                size = pop.x if config.size_var == "x" else np.ones(pop.N)
                pi_all = inclusion_probabilities(size, n)
                keys = (config.master_seed, _REPLICATE_STREAM, i, j)
                v_p = None
                if config.deff_mode == "monte_carlo":
                    v_p = _monte_carlo_variances(pop, pi_all, kernel, methods, config.B_reps, keys)
                tasks = [(pop, pi_all, theta_true, kernel, methods, config.level, (*keys, r), v_p)
                         for r in range(config.B_reps)]
                if pool is None:
                    reps = [_replicate_task(t) for t in tasks]
                else:
                    reps = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * n_jobs))))
                _tally(report, rho, n, theta_true, methods, reps)
    finally:
        if pool is not None:
            pool.shutdown()
    return report


def _tally(report, rho, n, theta_true, methods, reps):
    for m in methods:
        cell = CellResult(rho, n, m, theta_true=theta_true)
        lengths, lowers = [], []
        for rep in reps:
            code, length, lower = rep.outcomes[m]
            if code == "f":
                cell.failed += 1
                continue
            cell.covered += code == "c"
            cell.lower_miss += code == "l"
            cell.upper_miss += code == "u"
            lengths.append(length)
            lowers.append(lower)
        # fsum is exact-rounded, so the totals do not depend on summation order
        cell.sum_length = math.fsum(lengths)
        cell.sum_lower = math.fsum(lowers)
        report.cells.append(cell)
    report.diagnostics[(rho, n)] = {
        "theta_true": theta_true,
        "ratios": {m: np.array([rep.ratios.get(m, np.nan) for rep in reps])
                   for m in methods if m in JEL_METHODS},
        "lambda_sqrt_n": np.array([rep.lam_scaled for rep in reps]),
        "quad_rel_dev": np.array([rep.quad_rel_dev for rep in reps]),
    }


CSV_HEADER = ["rho", "n", "method", "cp", "l", "u", "al", "lb", "failed"]


def _csv_row(c: CellResult):
    return [f"{c.rho:g}", str(c.n), c.method, f"{c.cp:.1f}", f"{c.l:.1f}", f"{c.u:.1f}",
            f"{c.al:.3f}", f"{c.lb:.3f}", str(c.failed)]


def emit_report(report: SimulationReport, fmt: str = "csv") -> str:
    """Render ``report`` as CSV or as a markdown table laid out like the coverage tables."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for c in report.cells:
            writer.writerow(_csv_row(c))
        return buf.getvalue()
    if fmt == "markdown":
        cfg = report.config
        lines = [
            f"Kernel `{cfg.kernel_name}`, N={cfg.N}, B={cfg.B_reps}, nominal level {cfg.level:g}, "
            f"shift={cfg.shift:g}, master seed {cfg.master_seed}",
            "",
            "| rho | n | CI | CP(%) | L | U | AL | LB | failed |",
            "|---:|---:|:---|---:|---:|---:|---:|---:|---:|",
        ]
        prev = (None, None)
        for c in report.cells:
            rho_s = f"{c.rho:g}" if c.rho != prev[0] else ""
            n_s = str(c.n) if (c.rho, c.n) != prev else ""
            prev = (c.rho, c.n)
            row = _csv_row(c)
            lines.append(f"| {rho_s} | {n_s} | {c.method} | " + " | ".join(row[3:]) + " |")
        thetas = sorted({(c.rho, c.theta_true) for c in report.cells})
        if thetas:
            lines.append("")
            lines.append("theta_true: " + ", ".join(f"rho={r:g}: {t:.6f}" for r, t in thetas))
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}")


def parse_report_csv(text: str) -> list:
    """Inverse of the CSV form of :func:`emit_report`: one dict per row, typed."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ConfigError(f"unexpected report header {header}")
    rows = []
    for rec in reader:
        if len(rec) != len(CSV_HEADER):
            raise ConfigError(f"report row has {len(rec)} fields, expected {len(CSV_HEADER)}")
        rows.append({
            "rho": float(rec[0]), "n": int(rec[1]), "method": rec[2],
            **{k: float(v) for k, v in zip(CSV_HEADER[3:8], rec[3:8])},
            "failed": int(rec[8]),
        })
    return rows
