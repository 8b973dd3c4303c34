"""Fitting marginals, autocorrelation families, correlation maps and copula parameters."""

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import gammaln, log_ndtr, stdtr

from ._validation import check_series, make_rng
from .errors import DataError, DomainError, FitError, UndefinedStatisticError
from .models.extremes import (PowerAcf, t_copula_rho_for_tail,
                              t_copula_rho_for_tail_probability, tail_dependence_estimate)
from .models.simulate import t_markov_from_uniforms
from .uncertainty import _autocovariances


@dataclass
class FitReport:
    """Fitted parameters with the attained objective and free-form diagnostics."""

    params: dict
    residual: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), default=float, **kwargs)


def fit_weibull(series):
    """Maximum-likelihood Weibull ``(scale, shape)``.

    The shape solves the profile equation
    ``sum x^a log x / sum x^a - 1/a - mean(log x) = 0`` (bracketed root
    search); the scale is ``mean(x^a)^(1/a)``. Nonpositive values are
    dropped with a warning.
    """
    x = check_series(series)
    positive = x > 0
    if not positive.all():
        warnings.warn(f"dropped {int((~positive).sum())} nonpositive values", RuntimeWarning,
                      stacklevel=2)
        x = x[positive]
    if len(x) < 2 or np.ptp(x) == 0:
        raise FitError("Weibull fit needs at least two distinct positive values")
    logx = np.log(x / x.max())
    mean_log = logx.mean()

    def profile(a):
        w = np.exp(a * logx)
        return float(np.dot(w, logx) / w.sum()) - 1.0 / a - mean_log

    lo, hi = 1e-3, 1.0
    while profile(hi) < 0:
        hi *= 2.0
        if hi > 1e4:
            raise FitError("Weibull shape profile has no root below 1e4")
    shape = optimize.brentq(profile, lo, hi, xtol=1e-14, rtol=1e-14)
    scale = x.max() * float(np.mean(np.exp(shape * logx))) ** (1.0 / shape)
    return scale, shape


def empirical_acf(series, max_lag):
    """Sample autocorrelations at lags ``0..max_lag`` with the ``1/T`` normalisation."""
    x = check_series(series)
    if not 0 <= max_lag < len(x):
        raise DomainError(f"max_lag={max_lag} must lie in [0, {len(x)})")
    acov = _autocovariances(x - x.mean(), int(max_lag))
    if acov[0] == 0:
        raise DataError("constant series has no autocorrelation")
    return acov / acov[0]


@dataclass(frozen=True)
class AcfModelParams:
    """Parameters of ``(1 + kappa (s/zeta)^eta)^(-1/(eta kappa))``."""

    zeta: float
    eta: float
    kappa: float

    def __post_init__(self):
        if min(self.zeta, self.eta, self.kappa) <= 0:
            raise DomainError("zeta, eta and kappa must be positive")

    def acf(self):
        return PowerAcf(self.zeta, self.eta, self.kappa)

    def __call__(self, lag):
        return self.acf()(lag)


_ACF_STARTS = [(z, e, k) for z in (3.0, 10.0, 30.0) for e in (0.8, 1.6) for k in (0.5, 1.5)]


def fit_acf_model(acf_values, lags, starts=None, return_report=False):
    """Least-squares fit of the power-law ACF family.

    Minimises ``sum (acf - model)^2`` over ``log(zeta, eta, kappa)`` by
    Nelder-Mead from each point of a fixed start grid and keeps the best.
    """
    y = np.asarray(acf_values, dtype=float)
    lags = np.asarray(lags, dtype=float)
    if y.shape != lags.shape or len(y) < 3:
        raise DomainError("need at least three (lag, value) pairs of equal length")

    def loss(theta):
        z, e, k = np.exp(theta)
        model = np.exp(-np.log1p(k * (lags / z) ** e) / (e * k))
        return float(np.sum((y - model) ** 2))

    best = None
    for start in starts or _ACF_STARTS:
        res = optimize.minimize(loss, np.log(start), method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 20000,
                                         "maxfev": 40000})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise FitError("no start produced a finite residual",
                       residual=None if best is None else best.fun)
    params = AcfModelParams(*(float(v) for v in np.exp(best.x)))
    if return_report:
        return params, FitReport(params=asdict(params), residual=float(best.fun),
                                 diagnostics={"converged": bool(best.success),
                                              "n_starts": len(starts or _ACF_STARTS)})
    return params


def _weibull_moments(scale, shape):
    m1 = scale * math.exp(gammaln(1.0 + 1.0 / shape))
    m2 = scale * scale * math.exp(gammaln(1.0 + 2.0 / shape))
    return m1, math.sqrt(m2 - m1 * m1)


def _marginal_params(marginal):
    if hasattr(marginal, "scale") and hasattr(marginal, "shape"):
        scale, shape = np.atleast_1d(marginal.scale), np.atleast_1d(marginal.shape)
        if len(scale) != 1:
            raise DomainError("the correlation transform needs a stationary marginal")
        return float(scale[0]), float(shape[0])
    scale, shape = marginal
    return float(scale), float(shape)


def correlation_transform_numeric(rho, marginal, mu_V=None, sigma_V=None, quad_order=80):
    """Correlation of ``F^{-1}(Phi(X))`` and ``F^{-1}(Phi(Y))`` for standard normals with correlation ``rho``.

    ``marginal`` is a Weibull ``(scale, shape)`` pair or a constant
    :class:`~exceedance.nonstat.MarginalModel`. The double integral uses a
    tensor Gauss-Hermite rule after writing ``Y = rho X + sqrt(1 - rho^2) W``.
    ``mu_V`` and ``sigma_V`` default to the exact Weibull mean and standard
    deviation; other values shift the endpoints away from 0 and 1. ``None``
    for ``marginal`` means the identity (Gaussian) marginal.
    """
    if quad_order < 20:
        raise DomainError("quad_order must be at least 20")
    rho_arr = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(np.abs(rho_arr) > 1):
        raise DomainError("rho must lie in [-1, 1]")
    nodes, weights = np.polynomial.hermite.hermgauss(int(quad_order))
    x = math.sqrt(2.0) * nodes
    w = weights / math.sqrt(math.pi)
    if marginal is None:
        g = lambda v: v  # noqa: E731
        mu0, sd0 = 0.0, 1.0
    else:
        scale, shape = _marginal_params(marginal)
        g = lambda v: scale * (-log_ndtr(-v)) ** (1.0 / shape)  # noqa: E731
        mu0, sd0 = _weibull_moments(scale, shape)
    mu = mu0 if mu_V is None else float(mu_V)
    sd = sd0 if sigma_V is None else float(sigma_V)
    gx = g(x)
    out = np.empty(rho_arr.shape)
    for i, r in enumerate(rho_arr):
        y = r * x[:, None] + math.sqrt(max(0.0, 1.0 - r * r)) * x[None, :]
        cross = float(np.einsum("i,j,i,ij->", w, w, gx, g(y)))
        out[i] = (cross - mu * mu) / (sd * sd)
    if not np.all(np.isfinite(out)):
        raise FitError("non-finite quadrature value in the correlation transform")
    return float(out[0]) if np.ndim(rho) == 0 else out


@dataclass(frozen=True)
class TransformApprox:
    """``((1 + xi r)^u - 1) / ((1 + xi)^u - 1)`` and its inverse."""

    xi: float
    upsilon: float

    def __post_init__(self):
        if not self.xi > -1 or self.xi == 0:
            raise DomainError(f"xi={self.xi} must exceed -1 and be nonzero")
        if self.upsilon == 0:
            raise DomainError("upsilon must be nonzero")

    @property
    def _norm(self):
        return math.expm1(self.upsilon * math.log1p(self.xi))

    def forward(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.expm1(self.upsilon * np.log1p(self.xi * rho)) / self._norm
        return float(out) if out.ndim == 0 else out

    def inverse(self, r):
        r = np.asarray(r, dtype=float)
        out = np.expm1(np.log1p(r * self._norm) / self.upsilon) / self.xi
        return float(out) if out.ndim == 0 else out

    __call__ = forward


def correlation_transform_parametric(rho, params, direction="forward"):
    """Evaluate :class:`TransformApprox` forward or inverse."""
    if direction == "forward":
        return params.forward(rho)
    if direction == "inverse":
        return params.inverse(rho)
    raise DomainError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def fit_transform_params(marginal, mu_V=None, sigma_V=None, rho_grid=None, start=(0.1, 0.5),
                         return_report=False):
    """Least-squares ``(xi, upsilon)`` matching :func:`correlation_transform_numeric` on a grid."""
    grid = np.linspace(0.05, 0.99, 48) if rho_grid is None else np.asarray(rho_grid, float)
    if len(grid) < 5 or np.any((grid <= 0) | (grid >= 1)):
        raise DomainError("rho_grid needs at least five points inside (0, 1)")
    target = correlation_transform_numeric(grid, marginal, mu_V, sigma_V)

    def resid(p):
        xi, u = p
        if xi <= -1 or abs(xi) < 1e-12 or abs(u) < 1e-12:
            return np.full(len(grid), 1e3)
        return TransformApprox(xi, u).forward(grid) - target

    res = optimize.least_squares(resid, start, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not res.success:
        raise FitError(f"transform fit did not converge: {res.message}",
                       residual=float(np.sum(res.fun ** 2)))
    params = TransformApprox(*(float(v) for v in res.x))
    if return_report:
        return params, FitReport(params={"xi": params.xi, "upsilon": params.upsilon},
                                 residual=float(np.max(np.abs(res.fun))),
                                 diagnostics={"metric": "max_abs", "n_grid": len(grid)})
    return params


def _as_acf(target):
    return target.acf() if isinstance(target, AcfModelParams) else target


def fit_ar1_theta(target_acf, transform=None, horizon=100, lag_one_only=False):
    """Rate ``theta`` whose latent ACF ``exp(-theta n)`` best matches a target after the correlation map.

    Minimises ``sum_{n=1}^{horizon} (target(n) - transform(exp(-theta n)))^2``
    by golden-section search after bracketing on a log grid. With
    ``lag_one_only`` the lag-1 equation is solved exactly instead.
    ``transform`` defaults to the identity map.
    """
    acf = _as_acf(target_acf)
    fwd = (lambda r: r) if transform is None else transform.forward
    if lag_one_only:
        r1 = float(acf(1))
        latent = r1 if transform is None else transform.inverse(r1)
        if not 0 < latent < 1:
            raise FitError(f"lag-1 latent correlation {latent} outside (0, 1)")
        return -math.log(latent)
    n = np.arange(1, int(horizon) + 1, dtype=float)
    target = np.asarray(acf(n), dtype=float)

    def loss(log_theta):
        return float(np.sum((target - fwd(np.exp(-math.exp(log_theta) * n))) ** 2))

    grid = np.linspace(math.log(1e-5), math.log(10.0), 400)
    values = np.array([loss(g) for g in grid])
    i = int(np.clip(np.argmin(values), 1, len(grid) - 2))
    res = optimize.minimize_scalar(loss, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                   method="golden", tol=1e-12)
    return float(math.exp(res.x))


DEFAULT_NU_GRID = (4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 17.0, 20.0, 25.0, 30.0, 40.0)


def fit_t_copula(u_series, horizon=100, tail_b=1 - 1e-4, nu_grid=DEFAULT_NU_GRID,
                 sim_length=10 ** 6, seed=0, tail_constraint="limit", return_report=False):
    """``(nu, rho_t)`` of the bivariate-t Markov chain matching data on the uniform scale.

    The tail constraint fixes ``rho_t`` for each ``nu`` so that the chain's
    tail dependence equals the empirical one at ``tail_b``. Among those
    pairs, ``nu`` minimises ``sum_{n=1}^{horizon} (acf_U(n) - acf_chain(n))^2``
    where the chain ACF is estimated from a simulated path of
    ``sim_length`` steps. Every candidate reuses one uniform stream, so the
    objective is smooth in ``nu``. The best grid point is refined by a
    bounded scalar search between its neighbours.

    ``tail_constraint="limit"`` matches the empirical ratio to the limiting
    tail dependence; ``"finite"`` matches it to the chain's exact
    conditional exceedance probability at ``tail_b``, which removes the
    upward bias of the empirical ratio at a finite level.
    """
    if tail_constraint not in ("limit", "finite"):
        raise DomainError(f"unknown tail_constraint {tail_constraint!r}")
    u = check_series(u_series)
    if np.any((u <= 0) | (u >= 1)):
        raise DataError("u_series must lie strictly inside (0, 1)")
    try:
        lam = tail_dependence_estimate(u, tail_b)
    except UndefinedStatisticError as exc:
        raise FitError(f"tail constraint undefined at b={tail_b}: {exc}") from exc
    if not 0 < lam < 1:
        raise FitError(f"empirical tail dependence {lam} leaves no feasible correlation")
    target = empirical_acf(u, horizon)[1:]
    stream = make_rng(seed).random(int(sim_length))
    cache = {}

    def objective(nu):
        nu = float(nu)
        if nu not in cache:
            rho = (t_copula_rho_for_tail(nu, lam) if tail_constraint == "limit"
                   else t_copula_rho_for_tail_probability(nu, lam, tail_b))
            y = t_markov_from_uniforms(nu, rho, stream)
            sim = empirical_acf(stdtr(nu, y), horizon)[1:]
            cache[nu] = (float(np.sum((target - sim) ** 2)), rho)
        return cache[nu][0]

    grid = sorted(float(v) for v in nu_grid)
    if len(grid) < 3 or grid[0] <= 2:
        raise DomainError("nu_grid needs at least three values above 2")
    values = [objective(nu) for nu in grid]
    i = int(np.argmin(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-3})
    nu = float(res.x) if res.fun <= values[i] else grid[i]
    loss, rho = cache[nu]
    if return_report:
        return (nu, rho), FitReport(params={"nu": nu, "rho_t": rho}, residual=loss,
                                    diagnostics={"tail_dependence": lam, "tail_b": tail_b,
                                                 "tail_constraint": tail_constraint,
                                                 "grid": grid, "grid_loss": values,
                                                 "edge_of_grid": i in (0, len(grid) - 1)})
    return nu, rho
