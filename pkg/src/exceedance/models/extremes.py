"""Tail dependence, upcrossing and cluster statistics, ACF families and process models."""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln, ndtr, ndtri, stdtr, stdtrit

from .._validation import check_series
from ..errors import DataError, DomainError, ParameterError, UndefinedStatisticError
from .simulate import simulate_gaussian_acf, simulate_seasonal_scaled_ar1, simulate_t_markov


@dataclass(frozen=True)
class PairCounts:
    """Counts of consecutive pairs ``(V_{t-1} > b, V_t > b)``.

    ``n_ab`` counts pairs with the previous step in state ``a`` and the
    current step in state ``b`` (1 above, 0 not above). ``n_pairs`` is the
    number of pairs counted.
    """

    n00: int
    n01: int
    n10: int
    n11: int

    @property
    def n_pairs(self):
        return self.n00 + self.n01 + self.n10 + self.n11

    @property
    def n_prev_above(self):
        return self.n10 + self.n11

    @property
    def n_curr_above(self):
        return self.n01 + self.n11


def pair_counts(series, b, circular=False):
    """Consecutive-pair counts for threshold ``b``.

    With ``circular=True`` the pair ``(V_{T-1}, V_0)`` is included, so
    every up-crossing is matched by a down-crossing.
    """
    above = check_series(series) > b
    prev = np.roll(above, 1) if circular else above[:-1]
    curr = above if circular else above[1:]
    n11 = int(np.count_nonzero(prev & curr))
    n10 = int(np.count_nonzero(prev & ~curr))
    n01 = int(np.count_nonzero(~prev & curr))
    return PairCounts(n00=len(curr) - n11 - n10 - n01, n01=n01, n10=n10, n11=n11)


def tail_dependence_estimate(series, b, circular=False):
    """Fraction of steps above ``b`` whose predecessor was also above ``b``."""
    c = pair_counts(series, b, circular)
    if c.n_prev_above == 0:
        raise UndefinedStatisticError(f"no exceedance of b={b} before the last index")
    return c.n11 / c.n_prev_above


def upcrossing_rate_estimate(series, b, circular=False):
    """Fraction of consecutive pairs that cross ``b`` upwards."""
    values = check_series(series)
    if len(values) < 2:
        raise DataError("need at least two observations")
    c = pair_counts(values, b, circular)
    return c.n01 / c.n_pairs


def exceedance_probability(series, b, circular=False):
    """Fraction of steps above ``b`` among the current members of the pairs counted."""
    c = pair_counts(series, b, circular)
    return c.n_curr_above / c.n_pairs


def t_copula_tail_dependence(nu, rho_t):
    """Upper tail dependence ``2 t_{nu+1}(-sqrt((nu+1)(1-rho)/(1+rho)))`` of a bivariate t."""
    if not nu > 0:
        raise ParameterError(f"nu={nu} must be positive")
    if not -1 < rho_t <= 1:
        raise ParameterError(f"rho_t={rho_t} must lie in (-1, 1]")
    return float(2.0 * stdtr(nu + 1.0, -math.sqrt((nu + 1.0) * (1.0 - rho_t) / (1.0 + rho_t))))


def t_copula_rho_for_tail(nu, lam):
    """The ``rho_t`` with ``t_copula_tail_dependence(nu, rho_t) == lam``, in closed form."""
    if not 0 < lam < 1:
        raise DomainError(f"tail dependence {lam} must lie in (0, 1)")
    q = stdtrit(nu + 1.0, lam / 2.0) ** 2 / (nu + 1.0)
    return float((1.0 - q) / (1.0 + q))


def t_copula_rho_for_tail_probability(nu, lam, b):
    """The ``rho_t`` with ``t_copula_tail_probability(nu, rho_t, b) == lam``."""
    if not 1.0 - b < lam < 1:
        raise DomainError(f"tail probability {lam} must lie in ({1.0 - b}, 1)")
    return float(optimize.brentq(lambda r: t_copula_tail_probability(nu, r, b) - lam,
                                 0.0, 1.0 - 1e-12, xtol=1e-12))


def t_copula_tail_probability(nu, rho_t, b):
    """``P(U_1 > b | U_0 > b)`` for a bivariate t copula at a finite level ``b``.

    Tends to :func:`t_copula_tail_dependence` as ``b`` tends to 1 and lies
    above it for the levels usually encountered in data.
    """
    if not 0 < b < 1:
        raise DomainError(f"b={b} must lie in (0, 1)")
    q = float(stdtrit(nu, b))
    spread = (1.0 - rho_t * rho_t) / (nu + 1.0)

    def integrand(y):
        return math.exp(_t_logpdf(y, nu)) * float(stdtr(nu + 1.0, -(q - rho_t * y)
                                                        / math.sqrt((nu + y * y) * spread)))

    value, _ = integrate.quad(integrand, q, math.inf, epsabs=0.0, epsrel=1e-11, limit=200)
    return value / (1.0 - b)


def _t_logpdf(y, nu):
    return (gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0) - 0.5 * math.log(nu * math.pi)
            - (nu + 1.0) / 2.0 * math.log1p(y * y / nu))


@dataclass(frozen=True)
class ClusterSize:
    """Mean length of complete runs above a threshold."""

    mean: float
    n_runs: int
    censored_leading: bool
    censored_trailing: bool

    def __float__(self):
        return self.mean


def cluster_size_estimate(series, b):
    """Mean run length above ``b`` over runs that start with an up-crossing and end in view.

    A run already in progress at index 0 or still in progress at the last
    index is excluded and flagged in the returned diagnostics.
    """
    above = check_series(series) > b
    padded = np.concatenate([[False], above, [False]]).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    lengths = ends - starts
    keep = np.ones(len(lengths), dtype=bool)
    lead = bool(above[0])
    trail = bool(above[-1])
    if lead:
        keep[0] = False
    if trail and len(keep):
        keep[-1] = False
    if not keep.any():
        raise UndefinedStatisticError(f"no complete run above b={b} in the record")
    if lead or trail:
        warnings.warn("partial runs at the record edges were excluded", RuntimeWarning,
                      stacklevel=2)
    lengths = lengths[keep]
    return ClusterSize(mean=float(lengths.mean()), n_runs=int(len(lengths)),
                       censored_leading=lead, censored_trailing=trail)


class AcfFunction:
    """A stationary autocorrelation function ``rho(s)`` with ``rho(0) = 1``.

    Subclasses implement :meth:`_eval` for nonnegative lags; calls accept
    any real lags and use ``|s|``.
    """

    name = "acf"

    def __call__(self, lag):
        lag = np.abs(np.asarray(lag, dtype=float))
        out = np.where(lag == 0, 1.0, self._eval(np.where(lag == 0, 1.0, lag)))
        return float(out) if out.ndim == 0 else out

    def _eval(self, lag):
        raise NotImplementedError

    @property
    def params(self):
        return {}

    def to_dict(self):
        return {"kind": self.name, "params": self.params}

    @staticmethod
    def from_dict(doc):
        kinds = {"power": PowerAcf, "geometric": GeometricAcf, "exponential": ExponentialAcf,
                 "white": WhiteAcf}
        if doc["kind"] == "transformed":
            return TransformedAcf(AcfFunction.from_dict(doc["params"]["base"]),
                                  doc["params"]["xi"], doc["params"]["upsilon"])
        try:
            return kinds[doc["kind"]](**doc["params"])
        except KeyError:
            raise DataError(f"unknown ACF kind {doc['kind']!r}") from None

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({inner})"


class PowerAcf(AcfFunction):
    """``(1 + kappa (s / zeta)^eta)^(-1 / (eta kappa))``."""

    name = "power"

    def __init__(self, zeta, eta, kappa):
        if min(zeta, eta, kappa) <= 0:
            raise ParameterError("zeta, eta and kappa must be positive")
        self.zeta, self.eta, self.kappa = float(zeta), float(eta), float(kappa)

    def _eval(self, lag):
        return np.exp(-np.log1p(self.kappa * (lag / self.zeta) ** self.eta)
                      / (self.eta * self.kappa))

    @property
    def params(self):
        return {"zeta": self.zeta, "eta": self.eta, "kappa": self.kappa}


class GeometricAcf(AcfFunction):
    """``rho^s``, the AR(1) autocorrelation."""

    name = "geometric"

    def __init__(self, rho):
        if not -1 < rho < 1:
            raise ParameterError(f"rho={rho} must lie in (-1, 1)")
        self.rho = float(rho)

    def _eval(self, lag):
        magnitude = np.abs(self.rho) ** lag
        return np.where(np.mod(lag, 2) == 1, -magnitude, magnitude) if self.rho < 0 else magnitude

    @property
    def params(self):
        return {"rho": self.rho}


class ExponentialAcf(AcfFunction):
    """``exp(-theta s)``."""

    name = "exponential"

    def __init__(self, theta):
        if not theta > 0:
            raise ParameterError(f"theta={theta} must be positive")
        self.theta = float(theta)

    def _eval(self, lag):
        return np.exp(-self.theta * lag)

    @property
    def params(self):
        return {"theta": self.theta}


class WhiteAcf(AcfFunction):
    """Zero correlation at every nonzero lag."""

    name = "white"

    def _eval(self, lag):
        return np.zeros_like(lag)


class TransformedAcf(AcfFunction):
    """A base ACF pushed through the parametric correlation map ``((1+xi r)^u - 1)/((1+xi)^u - 1)``."""

    name = "transformed"

    def __init__(self, base, xi, upsilon):
        self.base, self.xi, self.upsilon = base, float(xi), float(upsilon)

    def _eval(self, lag):
        r = self.base(lag)
        return np.expm1(self.upsilon * np.log1p(self.xi * r)) / \
            math.expm1(self.upsilon * math.log1p(self.xi))

    @property
    def params(self):
        return {"base": self.base.to_dict(), "xi": self.xi, "upsilon": self.upsilon}


_KINDS = ("iid", "ar1", "gaussian", "ou", "t-markov", "seasonal-ar1")


@dataclass
class ProcessModel:
    """A latent process and the marginal it is mapped to.

    ``kind`` is one of ``iid``, ``ar1`` (``theta``: lag-s correlation
    ``exp(-theta s)``), ``gaussian`` (``acf``: an :class:`AcfFunction`),
    ``ou`` (``theta``; analytic only), ``t-markov`` (``nu``, ``rho_t``) or
    ``seasonal-ar1`` (``rho``, ``period``). ``marginal`` is ``None`` for the
    latent scale or any object with a ``quantile(t, p)`` method.
    """

    kind: str
    params: dict = field(default_factory=dict)
    marginal: object = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown model kind {self.kind!r}")
        p = self.params
        if self.kind in ("ar1", "ou") and not p.get("theta", 0) > 0:
            raise ParameterError("theta must be positive")
        if self.kind == "t-markov":
            if not p.get("nu", 0) > 2:
                raise ParameterError("nu must exceed 2")
            if not -1 < p.get("rho_t", 2) < 1:
                raise ParameterError("rho_t must lie in (-1, 1)")
        if self.kind == "seasonal-ar1" and not -1 < p.get("rho", 2) < 1:
            raise ParameterError("rho must lie in (-1, 1)")

    def latent_acf(self):
        if self.kind == "iid":
            return WhiteAcf()
        if self.kind in ("ar1", "ou"):
            return ExponentialAcf(self.params["theta"])
        if self.kind == "gaussian":
            acf = self.params["acf"]
            return AcfFunction.from_dict(acf) if isinstance(acf, dict) else acf
        raise DomainError(f"no Gaussian latent ACF for kind {self.kind!r}")

    def uniforms(self, T, seed=None):
        """Probability-integral-transformed latent path ``U_t`` in (0, 1)."""
        if self.kind == "t-markov":
            nu = self.params["nu"]
            y = simulate_t_markov(nu, self.params["rho_t"], T, seed)
            return stdtr(nu, y)
        if self.kind == "ou":
            raise DomainError("the OU model is evaluated analytically, not simulated")
        if self.kind == "seasonal-ar1":
            raise DomainError("the seasonal model has no stationary uniform scale")
        return ndtr(simulate_gaussian_acf(self.latent_acf(), T, seed))

    def simulate(self, T, seed=None):
        """A path of length ``T`` on the marginal's scale (latent scale without a marginal)."""
        if self.kind == "seasonal-ar1":
            return simulate_seasonal_scaled_ar1(self.params["rho"], self.params["period"], T,
                                                seed, self.params.get("phase_shift", 0))
        if self.marginal is None:
            if self.kind == "t-markov":
                return simulate_t_markov(self.params["nu"], self.params["rho_t"], T, seed)
            return ndtri(self.uniforms(T, seed))
        u = self.uniforms(T, seed)
        return self.marginal.quantile(np.arange(T), u)

    def to_dict(self):
        params = {k: (v.to_dict() if isinstance(v, AcfFunction) else v)
                  for k, v in self.params.items()}
        marginal = self.marginal.to_dict() if self.marginal is not None else None
        return {"kind": self.kind, "params": params, "marginal": marginal}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc):
        from ..nonstat import MarginalModel
        params = dict(doc.get("params", {}))
        if isinstance(params.get("acf"), dict):
            params["acf"] = AcfFunction.from_dict(params["acf"])
        marginal = doc.get("marginal")
        return cls(kind=doc["kind"], params=params,
                   marginal=MarginalModel.from_dict(marginal) if marginal else None)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))
