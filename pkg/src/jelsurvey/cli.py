"""Command line interface: ``simulate``, ``analyze``, ``sample`` and ``population``.

Exit codes: 0 success, 2 configuration or schema error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .designs import (
    SurveySample,
    calibration_weights,
    generate_population,
    inclusion_probabilities,
    make_rng,
    pps_draw,
    srswor_draw,
)
from .errors import InputError, JELError, NumericalError
from .inference import METHODS
from .io import analyze_file, read_population_csv, write_population_csv, write_sample_csv
from .simulation import DEFAULT_SHIFT, SimulationConfig, emit_report, run_simulation
from .ustat import KERNELS

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("jelsurvey")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jelsurvey", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo coverage experiment")
    p.add_argument("--config", required=True, help="key=value configuration file")
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")

    p = sub.add_parser("analyze", help="interval for a U-statistic parameter from a weighted CSV file")
    p.add_argument("--input", required=True)
    p.add_argument("--y", required=True, help="response column")
    p.add_argument("--d", required=True, help="design weight column (1/pi)")
    p.add_argument("--w", help="calibration weight column")
    p.add_argument("--x", help="auxiliary column(s), comma separated")
    p.add_argument("--xbar", help="known population mean(s) of the auxiliary column(s)")
    p.add_argument("--kernel", required=True, choices=sorted(KERNELS))
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("sample", help="draw a sample from a population CSV")
    p.add_argument("--population", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--design", choices=("sampford", "srswor"), default="sampford")
    p.add_argument("--out")

    p = sub.add_parser("population", help="generate a population from the linear model with exponential x")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--beta0", type=float, default=1.0)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--shift", type=float, default=DEFAULT_SHIFT)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, help="fill the pi column for this sample size")
    p.add_argument("--out")
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _open_out(out):
    return open(out, "w", newline="", encoding="utf-8") if out else sys.stdout


def cmd_simulate(args):
    config = SimulationConfig.from_file(args.config)
    report = run_simulation(config, n_jobs=args.jobs)
    _emit(emit_report(report, args.format), args.out)


def cmd_analyze(args):
    x_cols = [c.strip() for c in args.x.split(",")] if args.x else None
    if (args.x is None) != (args.xbar is None):
        raise InputError("--x and --xbar must be given together")
    try:
        xbar = _floats(args.xbar) if args.xbar else None
    except ValueError:
        raise InputError(f"--xbar must be numeric, got {args.xbar!r}") from None
    result = analyze_file(args.input, args.y, args.d, args.w, x_cols, xbar, args.kernel, args.method, args.level)
    sys.stdout.write(result.format())


def cmd_sample(args):
    pop, pi = read_population_csv(args.population)
    rng = make_rng(args.seed)
    if args.design == "srswor":
        idx = srswor_draw(pop.N, args.n, rng)
        pi_s = [args.n / pop.N] * args.n
    else:
        # A pi column that already sums to n is used as is; otherwise pi is proportional to x.
        if pi is None or abs(pi.sum() - args.n) > 1e-8:
            pi = inclusion_probabilities(pop.x, args.n)
        idx = pps_draw(pi, rng)
        pi_s = pi[idx]
    sample = SurveySample(pop.y[idx], pi_s, pop.x[idx], None, idx)
    try:
        sample = SurveySample(sample.y, sample.pi, sample.x, calibration_weights(sample.d, sample.x, pop.x_bar), idx)
    except NumericalError as exc:
        log.warning("calibration weights omitted: %s", exc)
    fh = _open_out(args.out)
    try:
        write_sample_csv(fh, sample)
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_population(args):
    pop = generate_population(args.N, args.beta0, args.beta1, args.rho, args.shift, args.seed)
    pi = inclusion_probabilities(pop.x, args.n) if args.n else None
    fh = _open_out(args.out)
    try:
        write_population_csv(fh, pop, pi)
    finally:
        if fh is not sys.stdout:
            fh.close()


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "sample": cmd_sample, "population": cmd_population}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, JELError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
