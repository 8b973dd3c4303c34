"""Command-line entry point: ``exceedance <verb> [options]``.

Verbs are ``estimate``, ``simulate``, ``calibrate``, ``bias-study`` and
``compare``. A JSON file given with ``--config`` overrides the flags.
Exit status is 0 on success, 2 for configuration errors, 3 for data
errors and 4 for numerical failures.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .calibration import (FitReport, TransformApprox, empirical_acf, fit_acf_model,
                          fit_ar1_theta, fit_weibull)
from .errors import (ConfigError, CovarianceError, DataError, DomainError, ExceedanceError,
                     FitError, InfiniteMomentError, NumericError, ParameterError,
                     UndefinedStatisticError)
from .experiments import (CurveReport, ExperimentConfig, _row, emit_curves, ingest_csv,
                          load_fixtures, run_bias_study, run_model_comparison)
from .hitting import VaryingInterval, looped_hitting_times
from .models.extremes import PowerAcf, ProcessModel
from .nonstat import MarginalModel
from .uncertainty import interval_from_times

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
HOURS_PER_YEAR = 8766.0
_TIME_COLUMNS = ("point", "ci_lo", "ci_hi", "cond_mean", "q10", "q90", "bound", "cond_se",
                 "point_se")


def _float_list(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _lag(text):
    if text in ("auto", "default"):
        return "auto" if text == "auto" else None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"max-lag must be an integer or 'auto': {text!r}") \
            from None


def _column(text):
    return int(text) if text.lstrip("-").isdigit() else text


def build_parser():
    parser = argparse.ArgumentParser(prog="exceedance",
                                     description="Return periods of threshold exceedances.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, with_output=True):
        p.add_argument("--config", help="JSON file whose keys override the flags")
        if with_output:
            p.add_argument("--output", help="output path (default: standard output)")
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    def data_args(p, required=True):
        p.add_argument("--input", required=required, help="CSV file with one value per row")
        p.add_argument("--column", type=_column, default=0, help="column index or header name")
        p.add_argument("--header-policy", choices=("auto", "skip", "none"), default="auto")

    def time_args(p):
        p.add_argument("--time-unit", choices=("steps", "years"), default="steps",
                       help="report times in sample steps or in years")
        p.add_argument("--step-hours", type=float, default=1.0,
                       help="hours per sample step, used with --time-unit years")

    p = sub.add_parser("estimate", help="return periods of a recorded series")
    common(p)
    data_args(p)
    time_args(p)
    p.add_argument("--b-grid", type=_float_list, required=True, help="thresholds, e.g. '15 20 25'")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--max-lag", type=_lag, default="auto")
    p.add_argument("--taper", choices=("none", "bartlett", "flat-top"), default=None)
    p.add_argument("--marginal", help="JSON file with a periodic Weibull marginal")

    p = sub.add_parser("simulate", help="draw a path from a process model")
    common(p, with_output=False)
    p.add_argument("--output", help="CSV path (default: standard output)")
    p.add_argument("--model", default="ar1",
                   choices=("iid", "ar1", "gaussian", "t-markov", "seasonal-ar1"))
    p.add_argument("--model-json", help="JSON process model; overrides --model")
    p.add_argument("--T", dest="T", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weibull", action="store_true", help="map to the fixture Weibull marginal")

    p = sub.add_parser("calibrate", help="fit marginal and correlation models to a series")
    common(p, with_output=False)
    data_args(p)
    p.add_argument("--output", help="JSON path (default: standard output)")
    p.add_argument("--horizon", type=int, default=100)

    for verb, choices in (("bias-study", ("stationary", "seasonal")),
                          ("compare", ("stationary", "nonstationary"))):
        p = sub.add_parser(verb, help=f"run the {verb} experiment")
        common(p)
        time_args(p)
        p.add_argument("--experiment", choices=choices, default=choices[0])
        p.add_argument("--T", dest="T", type=int, default=None)
        p.add_argument("--replications", type=int, default=200)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--b-grid", type=_float_list, default=None)
        p.add_argument("--level", type=float, default=0.95)
        p.add_argument("--max-lag", type=_lag, default="auto")
        p.add_argument("--oracle-length", type=int, default=5_000_000)
        p.add_argument("--sim-length", type=int, default=1_000_000)
        p.add_argument("--sim-replications", type=int, default=4)
        p.add_argument("--workers", type=int, default=None)
        if verb == "compare":
            data_args(p, required=False)
            p.add_argument("--period", type=int, default=8766)
            p.add_argument("--synthetic", choices=("ar1", "gaussian", "iid"), default="ar1")
    return parser


def _apply_config(args):
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, encoding="utf-8") as handle:
            doc = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    for key, value in doc.items():
        setattr(args, key.replace("-", "_"), value)
    return args


def _to_years(report, step_hours):
    factor = step_hours / HOURS_PER_YEAR
    for row in report.rows:
        for c in _TIME_COLUMNS:
            row[c] = row[c] * factor
    report.metadata["time_unit"] = "years"
    report.metadata["hours_per_year"] = HOURS_PER_YEAR
    return report


def _write(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _finish(report, args):
    if getattr(args, "time_unit", "steps") == "years":
        _to_years(report, args.step_hours)
    _write(emit_curves(report, None, args.format), args.output)


def cmd_estimate(args):
    series = ingest_csv(args.input, args.column, args.header_policy)
    values = series.values
    marginal = None
    if args.marginal:
        with open(args.marginal, encoding="utf-8") as handle:
            marginal = MarginalModel.from_json(handle.read())
    taper = None if args.taper in (None, "none") else args.taper
    if any(b2 <= b1 for b1, b2 in zip(args.b_grid, args.b_grid[1:])):
        raise ConfigError("b-grid must be strictly increasing")
    rows = []
    for b in args.b_grid:
        if marginal is None:
            times = looped_hitting_times(values, float(b))
        else:
            U = marginal.cdf(np.arange(len(values)), values)
            times = looped_hitting_times(U, VaryingInterval(lambda s, b=b: marginal.cdf(s, b)))
        if np.isfinite(times).all():
            e = interval_from_times(times, args.level, args.max_lag, taper)
            rows.append(_row("empirical", b, point=e.point, ci_lo=e.ci[0], ci_hi=e.ci[1],
                             point_se=e.std_error, n_finite=1))
        else:
            rows.append(_row("empirical", b, point=math.inf))
    _finish(CurveReport(rows, {"input": args.input, "n": len(values)}), args)


def cmd_simulate(args):
    fx = load_fixtures()
    if args.model_json:
        with open(args.model_json, encoding="utf-8") as handle:
            model = ProcessModel.from_json(handle.read())
    else:
        params = {"iid": {}, "ar1": {"theta": fx["ar1_theta"]},
                  "gaussian": {"acf": PowerAcf(**fx["acf"])},
                  "t-markov": dict(fx["t_copula"]),
                  "seasonal-ar1": {"rho": fx["bias_seasonal"]["rho"],
                                   "period": fx["bias_seasonal"]["period"]}}[args.model]
        marginal = None
        if args.weibull and args.model != "seasonal-ar1":
            marginal = MarginalModel.constant(fx["weibull"]["scale"], fx["weibull"]["shape"])
        model = ProcessModel(args.model, params, marginal)
    values = model.simulate(args.T, args.seed)
    _write("".join(f"{v!r}\n" for v in map(float, values)), args.output)


def cmd_calibrate(args):
    values = ingest_csv(args.input, args.column, args.header_policy).values
    scale, shape = fit_weibull(values)
    acf = empirical_acf(values, min(args.horizon, len(values) - 1))
    lags = np.arange(1, len(acf))
    params, acf_report = fit_acf_model(acf[1:], lags, return_report=True)
    fx = load_fixtures()
    transform = TransformApprox(**fx["transform"])
    report = FitReport(
        params={"weibull": {"scale": scale, "shape": shape},
                "acf": {"zeta": params.zeta, "eta": params.eta, "kappa": params.kappa},
                "ar1_theta": fit_ar1_theta(params, transform, horizon=len(lags)),
                "ar1_theta_lag1": fit_ar1_theta(params, transform, lag_one_only=True)},
        residual=acf_report.residual,
        diagnostics={"n": len(values), "horizon": len(lags), "transform": fx["transform"]})
    _write(report.to_json(indent=1) + "\n", args.output)


def _experiment_config(args, kind):
    fx = load_fixtures()
    T = args.T if args.T is not None else (
        fx["bias_stationary"]["T"] if kind != "compare-nonstationary" else 10 * 8766)
    return ExperimentConfig(experiment=kind, T=T, replications=args.replications, seed=args.seed,
                            b_grid=args.b_grid, max_lag=args.max_lag, level=args.level,
                            oracle_length=args.oracle_length, sim_length=args.sim_length,
                            sim_replications=args.sim_replications, output=args.output,
                            format=args.format, workers=args.workers)


def cmd_bias_study(args):
    config = _experiment_config(args, f"bias-{args.experiment}")
    _finish(run_bias_study(config), args)


def cmd_compare(args):
    config = _experiment_config(args, f"compare-{args.experiment}")
    data = ingest_csv(args.input, args.column, args.header_policy).values if args.input else None
    _finish(run_model_comparison(config, data, args.synthetic, args.period), args)


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "calibrate": cmd_calibrate,
            "bias-study": cmd_bias_study, "compare": cmd_compare}


def exit_code(exc):
    """Map an exception to the documented exit status."""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, DomainError, ParameterError, UndefinedStatisticError)):
        return EXIT_DATA
    if isinstance(exc, (NumericError, FitError, InfiniteMomentError, CovarianceError)):
        return EXIT_NUMERIC
    return EXIT_NUMERIC if isinstance(exc, ArithmeticError) else EXIT_DATA


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        COMMANDS[args.verb](args)
    except ExceedanceError as exc:
        print(f"exceedance: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(f"exceedance: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
