"""Replicated bias studies, model comparisons, CSV ingestion and curve output."""

import copy
import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy
from scipy.special import ndtr, stdtr

from ._validation import make_rng
from .calibration import TransformApprox
from .errors import ConfigError, DataError, ExceedanceError, NumericError
from .hitting import VaryingInterval, closed_form_mean, looped_hitting_times, mean_of_times
from .models.analytic import iid_mean_exceedance, ou_mean_exceedance, weibull_normal_score
from .models.extremes import PowerAcf
from .models.simulate import (seasonal_scale, simulate_ar1, simulate_gaussian_acf,
                              simulate_t_markov)
from .nonstat import MarginalModel, fit_seasonal_weibull
from .timeseries import TimeSeries
from .uncertainty import interval_from_times

WORKERS_ENV = "EXCEEDANCE_WORKERS"
COLUMNS = ("curve", "b", "point", "ci_lo", "ci_hi", "cond_mean", "q10", "q90", "n_finite",
           "bound", "cond_se", "point_se")
EXPERIMENTS = ("bias-stationary", "bias-seasonal", "compare-stationary",
               "compare-nonstationary", "estimate")


class BoundViolation(NumericError):
    """A finite estimate exceeded the largest value the estimator can produce."""


def load_fixtures():
    """Fitted constants shipped with the package, as a nested dict."""
    text = resources.files("exceedance").joinpath("data/fixtures.json").read_text()
    return json.loads(text)


def _merge(base, overrides):
    out = copy.deepcopy(base)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    """Settings of one experiment run.

    ``params`` overrides entries of :func:`load_fixtures` (nested dicts
    merge). ``b_grid`` defaults to the fixture grid of the experiment.
    """

    experiment: str
    T: int = 20000
    replications: int = 200
    seed: int = 0
    b_grid: list = None
    units: str = ""
    params: dict = field(default_factory=dict)
    max_lag: object = "auto"
    level: float = 0.95
    oracle_length: int = 5_000_000
    sim_length: int = 1_000_000
    sim_replications: int = 4
    output: str = None
    format: str = "csv"
    workers: int = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if int(self.replications) < 1:
            raise ConfigError("replications must be at least 1")
        if int(self.T) < 2:
            raise ConfigError("T must be at least 2")
        if not 0 < float(self.level) < 1:
            raise ConfigError("level must lie in (0, 1)")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")
        if self.b_grid is not None:
            grid = [float(b) for b in self.b_grid]
            if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
                raise ConfigError("b_grid must be strictly increasing")
            self.b_grid = grid

    @property
    def fixtures(self):
        return _merge(load_fixtures(), self.params)

    def grid(self, key):
        return list(self.b_grid) if self.b_grid is not None else list(self.fixtures[key]["b_grid"])

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def digest(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()

    @classmethod
    def from_dict(cls, doc):
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class CurveReport:
    """Rows of per-threshold results for one or more named curves, plus metadata."""

    rows: list
    metadata: dict = field(default_factory=dict)

    def curve(self, name):
        return [r for r in self.rows if r["curve"] == name]

    def column(self, name, column):
        return np.array([r[column] for r in self.curve(name)], dtype=float)

    def names(self):
        return list(dict.fromkeys(r["curve"] for r in self.rows))


def _row(curve, b, **values):
    row = {c: math.nan for c in COLUMNS}
    row.update(curve=curve, b=float(b), n_finite=0)
    row.update(values)
    return row


def _metadata(config, seeds, **extra):
    meta = {"config_sha256": config.digest(), "config": config.to_dict(), "seeds": seeds,
            "versions": {"numpy": np.__version__, "scipy": scipy.__version__}}
    meta.update(extra)
    return meta


def _worker_count(config):
    if config.workers is not None:
        return max(1, int(config.workers))
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from None


def _fan_out(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def ingest_csv(path, column=0, header_policy="auto"):
    """One numeric column of a CSV file as a :class:`TimeSeries`.

    ``header_policy`` is ``"skip"`` (first row is a header), ``"none"`` or
    ``"auto"`` (skip the first row when it does not parse). ``column`` is
    an index or, with a header, a column name. Rows are counted from 1 in
    error messages.
    """
    try:
        with open(path, newline="", encoding="utf-8-sig") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    start = 0
    if header_policy == "skip" or (header_policy == "auto" and not _parses(rows[0], column)):
        header = rows[0]
        start = 1
        if isinstance(column, str):
            if column not in header:
                raise DataError(f"column {column!r} not in header {header}")
            column = header.index(column)
    elif header_policy not in ("none", "auto"):
        raise ConfigError(f"unknown header_policy {header_policy!r}")
    if isinstance(column, str):
        raise DataError("named columns need a header row")
    values = []
    for number, row in enumerate(rows[start:], start=start + 1):
        try:
            value = float(row[column].strip())
        except (IndexError, ValueError):
            cell = row[column] if column < len(row) else ""
            raise DataError(f"row {number}: cannot parse {cell!r} as a number") from None
        if not math.isfinite(value):
            raise DataError(f"row {number}: non-finite value {value}")
        values.append(value)
    if not values:
        raise DataError(f"{path} has no data rows")
    return TimeSeries(np.array(values), name=os.path.basename(str(path)))


def _parses(row, column):
    try:
        float(row[column if isinstance(column, int) else 0])
        return True
    except (IndexError, ValueError):
        return False


def _summarise(curve, grid, estimates, oracle, bound):
    rows = []
    for j, b in enumerate(grid):
        est = estimates[:, j]
        finite = est[np.isfinite(est)]
        values = dict(n_finite=int(len(finite)), bound=bound)
        if oracle is not None and oracle[j] is None:
            values.update(point=math.inf, ci_lo=math.inf, ci_hi=math.inf, point_se=math.inf)
        elif oracle is not None:
            values.update(point=oracle[j].point, ci_lo=oracle[j].ci[0], ci_hi=oracle[j].ci[1],
                          point_se=oracle[j].std_error)
        if len(finite):
            values.update(cond_mean=float(finite.mean()), q10=float(np.quantile(finite, 0.1)),
                          q90=float(np.quantile(finite, 0.9)),
                          cond_se=float(finite.std(ddof=1) / math.sqrt(len(finite)))
                          if len(finite) > 1 else math.nan)
        rows.append(_row(curve, b, **values))
    return rows


def _check_bound(curve, grid, estimates, bound, seeds):
    bad = np.argwhere(np.isfinite(estimates) & (estimates > bound))
    if bad.size:
        r, j = bad[0]
        raise BoundViolation(f"{curve}: estimate {estimates[r, j]} exceeds {bound} at "
                             f"b={grid[j]} in replication {r} (seed entropy {seeds[r]})")


def _stationary_task(task):
    seed, rho, T, grid = task
    Z = simulate_ar1(rho, T, np.random.SeedSequence(seed))
    return [closed_form_mean(Z, b) for b in grid]


def _seasonal_schedule(b, period):
    return VaryingInterval(lambda s: b / seasonal_scale(s, period))


def _seasonal_task(task):
    seed, rho, period, T, grid = task
    Z = simulate_ar1(rho, T, np.random.SeedSequence(seed))
    V = Z * seasonal_scale(np.arange(T), period)
    nonstat = [mean_of_times(looped_hitting_times(Z, _seasonal_schedule(b, period)))
               for b in grid]
    naive = [closed_form_mean(V, b) for b in grid]
    return nonstat, naive


def _oracle(times, config):
    if not np.isfinite(times).all():
        return None
    return interval_from_times(times, config.level, config.max_lag)


def _replicate_seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def run_bias_study(config):
    """Replicated estimates against a long-run oracle.

    ``bias-stationary`` uses a Gaussian AR(1) path. ``bias-seasonal`` uses
    the seasonally scaled AR(1) and reports two curves: ``nonstat``, the
    looped estimator on the deseasonalised path with the scaled threshold
    schedule, and ``stationary-comparator``, the stationary closed form
    applied to the raw path. Finite estimates above ``(T-1)/2``
    (stationary) or ``(T+Y-2)/2`` (seasonal) abort the study.
    """
    fx = config.fixtures
    T, R = int(config.T), int(config.replications)
    seeds = _replicate_seeds(config.seed, R + 1)
    oracle_seed, rep_seeds = seeds[0], seeds[1:]
    workers = _worker_count(config)
    if config.experiment == "bias-stationary":
        rho = float(fx["bias_stationary"]["rho"])
        grid = config.grid("bias_stationary")
        est = np.array(_fan_out(_stationary_task, [(s, rho, T, grid) for s in rep_seeds],
                                workers), dtype=float).reshape(R, len(grid))
        bound = (T - 1) / 2
        _check_bound("stationary", grid, est, bound, rep_seeds)
        Z = simulate_ar1(rho, config.oracle_length, np.random.SeedSequence(oracle_seed))
        oracle = [_oracle(looped_hitting_times(Z, b), config) for b in grid]
        rows = _summarise("stationary", grid, est, oracle, bound)
        return CurveReport(rows, _metadata(config, seeds, rho=rho))
    if config.experiment == "bias-seasonal":
        rho = float(fx["bias_seasonal"]["rho"])
        period = int(fx["bias_seasonal"]["period"])
        grid = config.grid("bias_seasonal")
        out = _fan_out(_seasonal_task, [(s, rho, period, T, grid) for s in rep_seeds], workers)
        nonstat = np.array([o[0] for o in out], dtype=float).reshape(R, len(grid))
        naive = np.array([o[1] for o in out], dtype=float).reshape(R, len(grid))
        bound = (T + period - 2) / 2
        _check_bound("nonstat", grid, nonstat, bound, rep_seeds)
        _check_bound("stationary-comparator", grid, naive, (T - 1) / 2, rep_seeds)
        Z = simulate_ar1(rho, config.oracle_length, np.random.SeedSequence(oracle_seed))
        oracle = [_oracle(looped_hitting_times(Z, _seasonal_schedule(b, period)), config)
                  for b in grid]
        rows = (_summarise("nonstat", grid, nonstat, oracle, bound)
                + _summarise("stationary-comparator", grid, naive, oracle, (T - 1) / 2))
        return CurveReport(rows, _metadata(config, seeds, rho=rho, period=period))
    raise ConfigError(f"{config.experiment!r} is not a bias study")


def _mc_mean(values):
    values = np.asarray(values, dtype=float)
    if not np.isfinite(values).all():
        return math.inf, math.inf
    se = values.std(ddof=1) / math.sqrt(len(values)) if len(values) > 1 else math.nan
    return float(values.mean()), float(se)


def _latent_acfs(fx):
    acf = PowerAcf(**fx["acf"])
    transform = TransformApprox(**fx["transform"])
    return acf, transform


def stationary_model_curves(config, b_grid):
    """Model mean exceedance times over ``b_grid`` for the fitted stationary world.

    Returns ``{name: (values, mc_se)}`` for ``iid``, ``ou`` (analytic,
    zero MC error) and ``ar1`` and ``gaussian`` (simulated with
    ``config.sim_replications`` runs of ``config.sim_length`` steps).
    Thresholds are in data units and mapped to the latent normal scale.
    """
    fx = config.fixtures
    scale, shape = fx["weibull"]["scale"], fx["weibull"]["shape"]
    theta = float(fx["ar1_theta"])
    acf, transform = _latent_acfs(fx)
    z = np.array([weibull_normal_score(b, scale, shape) for b in b_grid])
    curves = {"iid": (np.array([iid_mean_exceedance(b, scale, shape) for b in b_grid]),
                      np.zeros(len(b_grid))),
              "ou": (np.array([ou_mean_exceedance(theta, zb) if zb > -8 else 0.0 for zb in z]),
                     np.zeros(len(b_grid)))}
    seeds = _replicate_seeds(config.seed + 1, int(config.sim_replications))
    latent = lambda n: transform.inverse(acf(n))  # noqa: E731
    sims = {"ar1": [], "gaussian": []}
    for s in seeds:
        ss = np.random.SeedSequence(s)
        a, g = ss.spawn(2)
        Za = simulate_ar1(math.exp(-theta), config.sim_length, a)
        Zg = simulate_gaussian_acf(latent, config.sim_length, g)
        sims["ar1"].append([closed_form_mean(Za, zb) for zb in z])
        sims["gaussian"].append([closed_form_mean(Zg, zb) for zb in z])
    for name, runs in sims.items():
        runs = np.array(runs, dtype=float)
        pairs = [_mc_mean(runs[:, j]) for j in range(len(b_grid))]
        curves[name] = (np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))
    return curves


def _default_seasonal_marginal(fx, period):
    t = np.arange(period)
    scale = fx["weibull"]["scale"] * (1.0 + 0.2 * np.cos(2.0 * np.pi * t / period))
    return MarginalModel(scale=scale, shape=np.full(period, fx["weibull"]["shape"]))


def _nonstat_curve(U, marginal, b_grid):
    out = []
    for b in b_grid:
        alpha = VaryingInterval(lambda s, b=b: marginal.cdf(s, b))
        out.append(mean_of_times(looped_hitting_times(U, alpha)))
    return out


def nonstationary_model_curves(config, marginal, b_grid):
    """Simulated curves for the independent-seasonal, Gaussian-copula and t-copula models."""
    fx = config.fixtures
    acf2 = PowerAcf(**fx["acf2"])
    nu, rho_t = fx["t_copula"]["nu"], fx["t_copula"]["rho_t"]
    seeds = _replicate_seeds(config.seed + 2, int(config.sim_replications))
    sims = {"is": [], "gaussian2": [], "t": []}
    for s in seeds:
        a, g, t = np.random.SeedSequence(s).spawn(3)
        n = config.sim_length
        sims["is"].append(_nonstat_curve(make_rng(a).random(n), marginal, b_grid))
        sims["gaussian2"].append(_nonstat_curve(ndtr(simulate_gaussian_acf(acf2, n, g)),
                                                marginal, b_grid))
        sims["t"].append(_nonstat_curve(stdtr(nu, simulate_t_markov(nu, rho_t, n, t)),
                                        marginal, b_grid))
    curves = {}
    for name, runs in sims.items():
        runs = np.array(runs, dtype=float)
        pairs = [_mc_mean(runs[:, j]) for j in range(len(b_grid))]
        curves[name] = (np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))
    return curves


def synthetic_record(config, kind="ar1"):
    """Record of ``config.T`` steps drawn from a fixture model, in data units."""
    fx = config.fixtures
    scale, shape = fx["weibull"]["scale"], fx["weibull"]["shape"]
    seed = np.random.SeedSequence((config.seed, 7))
    if kind == "ar1":
        Z = simulate_ar1(math.exp(-fx["ar1_theta"]), config.T, seed)
    elif kind == "gaussian":
        acf, transform = _latent_acfs(fx)
        Z = simulate_gaussian_acf(lambda n: transform.inverse(acf(n)), config.T, seed)
    elif kind == "iid":
        Z = make_rng(seed).standard_normal(config.T)
    else:
        raise ConfigError(f"unknown synthetic kind {kind!r}")
    marginal = MarginalModel.constant(scale, shape)
    return marginal.quantile(0, ndtr(Z))


def run_model_comparison(config, data=None, synthetic="ar1", period=None):
    """Empirical return periods with intervals next to model curves.

    ``compare-stationary`` adds the ``iid``, ``ar1``, ``gaussian`` and
    ``ou`` model curves; ``compare-nonstationary`` fits a seasonal Weibull
    marginal to the data and adds the ``is``, ``gaussian2`` and ``t``
    curves. Without ``data`` a synthetic record is drawn from the fixture
    model named by ``synthetic``.
    """
    fx = config.fixtures
    grid = list(config.b_grid) if config.b_grid is not None else list(np.arange(15.0, 25.5, 1.0))
    if config.experiment == "compare-stationary":
        values = np.asarray(data if data is not None else synthetic_record(config, synthetic),
                            dtype=float)
        rows = []
        for b in grid:
            times = looped_hitting_times(values, b)
            if np.isfinite(times).all():
                e = interval_from_times(times, config.level, config.max_lag)
                rows.append(_row("empirical", b, point=e.point, ci_lo=e.ci[0], ci_hi=e.ci[1],
                                 point_se=e.std_error, n_finite=1))
            else:
                rows.append(_row("empirical", b, point=math.inf))
        for name, (vals, se) in stationary_model_curves(config, grid).items():
            rows += [_row(name, b, point=v, point_se=s, n_finite=int(math.isfinite(v)))
                     for b, v, s in zip(grid, vals, se)]
        return CurveReport(rows, _metadata(config, [config.seed], synthetic=data is None))
    if config.experiment == "compare-nonstationary":
        period = int(period or 8766)
        if data is None:
            marginal_true = _default_seasonal_marginal(fx, period)
            Z = simulate_gaussian_acf(PowerAcf(**fx["acf2"]), config.T,
                                      np.random.SeedSequence((config.seed, 8)))
            values = marginal_true.quantile(np.arange(config.T), ndtr(Z))
        else:
            values = np.asarray(data, dtype=float)
        marginal = fit_seasonal_weibull(values, period)
        U = marginal.cdf(np.arange(len(values)), values)
        rows = []
        for b in grid:
            alpha = VaryingInterval(lambda s, b=b: marginal.cdf(s, b))
            times = looped_hitting_times(U, alpha)
            if np.isfinite(times).all():
                e = interval_from_times(times, config.level, config.max_lag)
                rows.append(_row("empirical", b, point=e.point, ci_lo=e.ci[0], ci_hi=e.ci[1],
                                 point_se=e.std_error, n_finite=1))
            else:
                rows.append(_row("empirical", b, point=math.inf))
        for name, (vals, se) in nonstationary_model_curves(config, marginal, grid).items():
            rows += [_row(name, b, point=v, point_se=s, n_finite=int(math.isfinite(v)))
                     for b, v, s in zip(grid, vals, se)]
        return CurveReport(rows, _metadata(config, [config.seed], period=period,
                                           marginal=marginal.to_dict()))
    raise ConfigError(f"{config.experiment!r} is not a model comparison")


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def curves_to_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in report.rows:
        writer.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def curves_to_json(report):
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        return v
    rows = [{c: clean(_plain(row[c])) for c in COLUMNS} for row in report.rows]
    return json.dumps({"columns": list(COLUMNS), "rows": rows, "metadata": report.metadata},
                      sort_keys=False, indent=1, default=_plain) + "\n"


def _plain(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def emit_curves(report, path=None, format="csv"):
    """Write a report as CSV or JSON; returns the text. ``path=None`` only renders."""
    if format == "csv":
        text = curves_to_csv(report)
    elif format == "json":
        text = curves_to_json(report)
    else:
        raise ConfigError(f"unknown format {format!r}")
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
        except OSError as exc:
            raise ExceedanceError(f"cannot write {path}: {exc}") from exc
    return text


def read_curves(path_or_text):
    """Parse CSV produced by :func:`emit_curves` back into a :class:`CurveReport`."""
    text = path_or_text
    if os.path.exists(str(path_or_text)):
        with open(path_or_text, encoding="utf-8") as handle:
            text = handle.read()
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {"curve": rec["curve"]}
        for c in COLUMNS[1:]:
            row[c] = int(rec[c]) if c == "n_finite" else float(rec[c])
        rows.append(row)
    return CurveReport(rows)
