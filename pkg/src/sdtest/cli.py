"""Command-line front end: ``sdt {test,power,robust,mixture-cdf,simulate,tables}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from importlib import resources

import numpy as np

EX_OK = 0
EX_REJECT = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_SOFTWARE = 70

DEFAULT_GAMMA = 0.3
DEFAULT_BETA = 0.3
DEFAULT_LAMBDA = 0.0
DEFAULT_ALPHA = 0.05


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# --- serialisation ---------------------------------------------------------------------


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v} cannot be serialised")
        return "%.17g" % v
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits; NaN and infinities are errors."""
    return _encode(obj)


# --- input ------------------------------------------------------------------------------


def bundled_sample_path() -> str:
    return str(resources.files("sdtest").joinpath("data", "sample_normal50.csv"))


def read_observations(path: str) -> np.ndarray:
    """Single-column CSV; a non-numeric first row is taken as a header."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EX_USAGE) from exc
    values = []
    for k, raw in enumerate(lines, start=1):
        cell = raw.strip().split(",")[0].strip().strip('"')
        if not cell:
            continue
        try:
            v = float(cell)
        except ValueError:
            if k == 1:
                continue
            raise CliError(f"{path}:{k}: not a number: {cell!r}", EX_DATAERR) from None
        if not math.isfinite(v):
            raise CliError(f"{path}:{k}: non-finite observation", EX_DATAERR)
        values.append(v)
    if not values:
        raise CliError(f"{path}: no observations", EX_DATAERR)
    return np.array(values)


# --- argument parsing ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str):
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _add_common(p, *, gamma=True, lam=True, beta=True, alpha=True):
    p.add_argument("--theta0", type=float, default=0.0, help="null mean")
    p.add_argument("--sigma", type=float, default=1.0, help="known standard deviation")
    if gamma:
        p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="divergence gamma in [0, 1]")
    if lam:
        p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA, help="divergence lambda")
    if beta:
        p.add_argument("--beta", type=float, default=DEFAULT_BETA, help="estimator tuning beta >= 0")
    if alpha:
        p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="level in (0, 1)")


def _add_output(p, default="json"):
    p.add_argument("--output", choices=("json", "csv"), default=default, help="output format")
    p.add_argument("--out", default=None, help="write to this path instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="sdt", description="Robust S-divergence tests for a normal mean with known variance.",
                     formatter_class=fmt,
                     epilog="Recommended tuning region: gamma = beta in [0.3, 0.5], lambda in [-0.5, 0].")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="run the test on a data file", formatter_class=fmt)
    p.add_argument("data", nargs="?", default=None, help="single-column CSV; the bundled 50-point sample if omitted")
    _add_common(p)
    p.add_argument("--exit-on-reject", action="store_true", help="exit with status 2 when the null is rejected")
    _add_output(p)

    p = sub.add_parser("power", help="power approximation or sample-size planning", formatter_class=fmt)
    _add_common(p)
    p.add_argument("--theta-star", type=float, default=None, help="fixed alternative mean")
    p.add_argument("--n", type=int, default=None, help="sample size for the fixed-alternative approximation")
    p.add_argument("--target-power", type=float, default=None, help="solve for the smallest n reaching this power")
    p.add_argument("--delta", type=float, default=None, help="contiguous drift Delta (theta0 + Delta/sqrt(n))")
    p.add_argument("--epsilon", type=float, default=0.0, help="contamination coefficient for the contiguous power")
    p.add_argument("--y", type=float, default=0.0, help="contamination point for the contiguous power")
    _add_output(p)

    p = sub.add_parser("robust", help="influence diagnostics on a y-grid", formatter_class=fmt)
    p.add_argument("--diagnostic", default="if2", help="one of if2, pif, lif, inflation, slope")
    _add_common(p, lam=True)
    p.add_argument("--y-min", type=float, default=-10.0, help="grid start")
    p.add_argument("--y-max", type=float, default=10.0, help="grid end")
    p.add_argument("--points", type=int, default=201, help="number of grid points")
    p.add_argument("--delta", type=float, default=1.0, help="contiguous drift for pif")
    p.add_argument("--epsilon", type=float, default=0.05, help="contamination mass for inflation")
    _add_output(p, default="csv")

    p = sub.add_parser("mixture-cdf", help="CDF or quantile of sum zeta_i chi2_1(delta_i)", formatter_class=fmt)
    p.add_argument("--zeta", type=_floats, required=True, help="weights, comma or space separated")
    p.add_argument("--delta", type=_floats, default=None, help="non-centralities (default all zero)")
    p.add_argument("--x", type=_floats, default=None, help="evaluation points")
    p.add_argument("--quantile", type=float, default=None, help="probability level for a quantile")
    p.add_argument("--tol", type=float, default=1e-10, help="series truncation tolerance")
    _add_output(p)

    p = sub.add_parser("simulate", help="empirical size or power by Monte Carlo", formatter_class=fmt)
    p.add_argument("--n", type=int, default=50, help="sample size")
    p.add_argument("--reps", type=int, default=1000, help="replications")
    p.add_argument("--seed", type=int, default=0, help="base seed (SDT_SEED overrides)")
    p.add_argument("--alternative", choices=("null", "contiguous", "fixed"), default="null", help="data mean")
    p.add_argument("--alt-value", type=float, default=0.0, help="Delta for contiguous, theta1 for fixed")
    p.add_argument("--epsilon", type=float, default=0.0, help="contamination proportion")
    p.add_argument("--contamination-mean", type=float, default=1.0, help="mean of the contaminating normal")
    p.add_argument("--betas", type=_floats, default=[0.0, 0.1, 0.3, 0.5, 0.7, 1.0], help="gamma = beta grid")
    p.add_argument("--lams", type=_floats, default=[0.0], help="lambda grid")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    _add_common(p, gamma=False, lam=False, beta=False)
    _add_output(p)

    p = sub.add_parser("tables", help="regenerate the reference tables", formatter_class=fmt)
    p.add_argument("--which", choices=("contiguous_power", "empirical_size", "inflation_ratios", "all"),
                   default="all", help="table to generate")
    p.add_argument("--out-dir", default="tables", help="directory for CSV and JSON files")
    p.add_argument("--reps", type=int, default=1000, help="replications for the empirical size table")
    p.add_argument("--seed", type=int, default=0, help="base seed (SDT_SEED overrides)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    return parser


def _validate(args):
    def bad(msg):
        raise CliError(msg, EX_USAGE)

    g = getattr(args, "gamma", None)
    if g is not None and not 0.0 <= g <= 1.0:
        bad("gamma must lie in [0, 1]")
    b = getattr(args, "beta", None)
    if b is not None and not b >= 0:
        bad("beta must be nonnegative")
    a = getattr(args, "alpha", None)
    if a is not None and not 0.0 < a < 1.0:
        bad("alpha must lie in (0, 1)")
    s = getattr(args, "sigma", None)
    if s is not None and not s > 0:
        bad("sigma must be positive")
    for name in ("lam", "theta0"):
        v = getattr(args, name, None)
        if v is not None and not math.isfinite(v):
            bad(f"{name} must be finite")
    if hasattr(args, "seed"):
        env = os.environ.get("SDT_SEED")
        if env is not None:
            try:
                args.seed = int(env)
            except ValueError:
                bad(f"SDT_SEED must be an integer, got {env!r}")


# --- commands -----------------------------------------------------------------------------


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_block(columns, rows) -> str:
    from .simulation import Table

    return Table("out", tuple(columns), rows).to_csv()


def _model(args):
    from .models import NormalKnownVarModel

    return NormalKnownVarModel(args.sigma)


def cmd_test(args) -> int:
    from .divergence import SParams
    from .testing import HypothesisSpec, run_test

    x = read_observations(args.data or bundled_sample_path())
    out = run_test(x, _model(args), HypothesisSpec([args.theta0], args.alpha), SParams(args.gamma, args.lam), args.beta)
    rec = {
        "statistic": out.statistic,
        "critical_value": out.critical_value,
        "p_value": out.p_value,
        "reject": out.reject,
        "theta_hat": float(out.theta_hat[0]),
        "n": out.n,
        "params": {"gamma": args.gamma, "lambda": args.lam, "beta": args.beta, "alpha": args.alpha,
                   "theta0": args.theta0, "sigma": args.sigma},
    }
    if args.output == "json":
        _emit(args, dumps(rec) + "\n")
    else:
        flat = {k: v for k, v in rec.items() if k != "params"}
        _emit(args, _csv_block(flat.keys(), [list(flat.values())]))
    return EX_REJECT if (out.reject and args.exit_on_reject) else EX_OK


def cmd_power(args) -> int:
    from .divergence import SParams
    from .testing import ContaminationSpec, HypothesisSpec, contaminated_power, power_approx, sample_size_for_power

    m = _model(args)
    spec = HypothesisSpec([args.theta0], args.alpha)
    params = SParams(args.gamma, args.lam)
    rec = {"params": {"gamma": args.gamma, "lambda": args.lam, "beta": args.beta, "alpha": args.alpha,
                      "theta0": args.theta0, "sigma": args.sigma}}
    if args.delta is not None:
        if args.epsilon < 0:
            raise CliError("epsilon must be nonnegative", EX_USAGE)
        cont = ContaminationSpec(args.epsilon, args.y, [args.delta])
        rec.update(delta=args.delta, epsilon=args.epsilon, y=args.y,
                   contiguous_power=contaminated_power(m, [args.theta0], cont, args.gamma, args.beta, args.alpha))
    elif args.theta_star is not None:
        if args.theta_star == args.theta0:
            raise CliError("theta-star must differ from theta0", EX_USAGE)
        rec["theta_star"] = args.theta_star
        if args.target_power is not None:
            if not 0.0 < args.target_power < 1.0:
                raise CliError("target power must lie in (0, 1)", EX_USAGE)
            n = sample_size_for_power(m, [args.theta_star], spec, params, args.beta, args.target_power)
            rec.update(target_power=args.target_power, n=n,
                       power=power_approx(m, [args.theta_star], spec, params, args.beta, n))
        elif args.n is not None:
            if args.n < 1:
                raise CliError("n must be positive", EX_USAGE)
            rec.update(n=args.n, power=power_approx(m, [args.theta_star], spec, params, args.beta, args.n))
        else:
            raise CliError("give --n or --target-power with --theta-star", EX_USAGE)
    else:
        raise CliError("give --theta-star or --delta", EX_USAGE)
    if args.output == "json":
        _emit(args, dumps(rec) + "\n")
    else:
        flat = {k: v for k, v in rec.items() if k != "params"}
        _emit(args, _csv_block(flat.keys(), [list(flat.values())]))
    return EX_OK


DIAGNOSTICS = ("if2", "pif", "lif", "inflation", "slope")


def cmd_robust(args) -> int:
    from . import robustness as rb

    if args.diagnostic not in DIAGNOSTICS:
        raise CliError(f"unknown diagnostic {args.diagnostic!r}; choose from {', '.join(DIAGNOSTICS)}", EX_USAGE)
    if args.points < 2 or not args.y_max > args.y_min:
        raise CliError("grid needs at least two points and y-max > y-min", EX_USAGE)
    m = _model(args)
    th0 = [args.theta0]
    y = np.linspace(args.y_min, args.y_max, args.points)
    d = args.diagnostic
    if d == "if2":
        vals = rb.if2_test(y, m, th0, args.gamma, args.beta)
    elif d == "pif":
        vals = rb.pif(y, m, th0, [args.delta], args.gamma, args.beta, args.alpha)
    elif d == "lif":
        vals = rb.lif(y, m, th0, args.gamma, args.beta, args.alpha)
    elif d == "slope":
        vals = rb.inflation_slope(y, m, th0, args.gamma, args.beta)
    else:
        if not 0.0 <= args.epsilon < 1.0:
            raise CliError("epsilon must lie in [0, 1)", EX_USAGE)
        vals = np.array([rb.inflation_ratio(args.epsilon, v, m, th0, args.gamma, args.beta) for v in y])
    vals = np.asarray(vals, dtype=float)
    if args.output == "csv":
        _emit(args, _csv_block(("y", d), [[a, b] for a, b in zip(y, vals)]))
    else:
        _emit(args, dumps({"diagnostic": d, "y": y, "value": vals}) + "\n")
    return EX_OK


def cmd_mixture_cdf(args) -> int:
    from . import chi2mix

    delta = args.delta if args.delta is not None else [0.0] * len(args.zeta)
    try:
        mix = chi2mix.ChiSqMixture.of(args.zeta, delta)
    except ValueError as exc:
        raise CliError(str(exc), EX_USAGE) from exc
    if (args.x is None) == (args.quantile is None):
        raise CliError("give exactly one of --x or --quantile", EX_USAGE)
    if args.x is not None:
        xs = np.asarray(args.x, dtype=float)
        cdf = np.atleast_1d(chi2mix.cdf(mix, xs, tol=args.tol))
        rows = [[a, b] for a, b in zip(xs, cdf)]
        cols = ("x", "cdf")
    else:
        if not 0.0 < args.quantile < 1.0:
            raise CliError("quantile level must lie in (0, 1)", EX_USAGE)
        rows = [[args.quantile, chi2mix.quantile(mix, args.quantile, tol=args.tol)]]
        cols = ("q", "quantile")
    if args.output == "csv":
        _emit(args, _csv_block(cols, rows))
    else:
        _emit(args, dumps({"zeta": list(mix.zeta), "delta": list(mix.delta),
                           "rows": [dict(zip(cols, r)) for r in rows]}) + "\n")
    return EX_OK


def cmd_simulate(args) -> int:
    from .simulation import Alternative, SimulationConfig, run_simulation

    try:
        cfg = SimulationConfig(n=args.n, reps=args.reps, seed=args.seed, alpha=args.alpha, theta0=args.theta0,
                               sigma=args.sigma, betas=tuple(args.betas), lams=tuple(args.lams),
                               alternative=Alternative(args.alternative, args.alt_value), epsilon=args.epsilon,
                               contamination_mean=args.contamination_mean, workers=args.workers)
    except ValueError as exc:
        raise CliError(str(exc), EX_USAGE) from exc
    if any(not 0.0 <= b <= 1.0 for b in cfg.betas):
        raise CliError("gamma = beta grid must lie in [0, 1]", EX_USAGE)
    table = run_simulation(cfg).to_table("simulation")
    _emit(args, table.to_csv() if args.output == "csv" else table.to_json() + "\n")
    return EX_OK


def cmd_tables(args) -> int:
    from .simulation import table_generator

    names = ("contiguous_power", "inflation_ratios", "empirical_size") if args.which == "all" else (args.which,)
    for name in names:
        kw = {"reps": args.reps, "seed": args.seed, "workers": args.workers} if name == "empirical_size" else {}
        csv_path, json_path = table_generator(name, **kw).write(args.out_dir)
        print(csv_path)
        print(json_path)
    return EX_OK


COMMANDS = {
    "test": cmd_test,
    "power": cmd_power,
    "robust": cmd_robust,
    "mixture-cdf": cmd_mixture_cdf,
    "simulate": cmd_simulate,
    "tables": cmd_tables,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        _validate(args)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"sdt: {exc}", file=sys.stderr)
        return exc.code
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        print(f"sdt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EX_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
