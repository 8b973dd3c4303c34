"""Reduction of non-stationary exceedance problems to ergodic ones.

If ``G_t`` is injective for every ``t`` then ``V_{u+s}`` lies in ``beta_s``
exactly when ``G_{u+s}(V_{u+s})`` lies in ``G_{u+s}(beta_s)``. Applying the
looped estimator to the transformed series with the transformed,
time-varying threshold therefore estimates hitting times of the original
series whenever the transformed series is ergodic.
"""

import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from ._validation import check_series
from .errors import DataError, DomainError, FitError, UnsupportedFormError
from .hitting import (ConstantInterval, GeneralRegion, ThresholdSchedule, VaryingInterval,
                      as_schedule, looped_hitting_times)
from .uncertainty import interval_from_times


@dataclass(frozen=True)
class TimeTransform:
    """A time-dependent injective map ``G_t``.

    ``forward(t, v)`` must broadcast over arrays of times and values.
    ``increasing`` declares every ``G_t`` strictly increasing on the real
    line, which lets interval thresholds map to intervals. ``inverse`` is
    the pointwise inverse, needed only for the predicate form.
    """

    forward: Callable
    increasing: bool = True
    inverse: Optional[Callable] = None
    output_dim: int = 1

    def __call__(self, t, v):
        return self.forward(t, v)


def identity_transform():
    return TimeTransform(forward=lambda t, v: np.asarray(v, dtype=float) + 0.0 * np.asarray(t),
                         inverse=lambda t, x: x)


def scale_transform(scale):
    """``G_t(v) = v / S_t`` for a positive scale function ``S``."""
    return TimeTransform(forward=lambda t, v: np.asarray(v) / scale(np.asarray(t)),
                         inverse=lambda t, x: np.asarray(x) * scale(np.asarray(t)))


def marginal_transform(marginal):
    """``G_t(v) = F_t(v)``, the probability integral transform of a marginal model."""
    return TimeTransform(forward=marginal.cdf, inverse=marginal.quantile)


def transform_series(series, transform):
    """Pointwise ``G_t(V_t)`` for ``t = 0..T-1``."""
    values = check_series(series, allow_multivariate=True)
    out = np.asarray(transform.forward(np.arange(len(values)), values), dtype=float)
    finite = np.isfinite(out)
    if not finite.all():
        bad = int(np.flatnonzero(~finite.reshape(len(out), -1).all(axis=1))[0])
        raise DataError(f"transformed value at index {bad} is not finite")
    return out


def transformed_threshold(schedule, transform, u=0, form="auto"):
    """The schedule ``alpha_s = G_{u+s}(beta_s)``.

    For interval schedules and increasing transforms the result is the
    interval ``(G_{u+s}(b_s), inf)``. Otherwise membership is decided by
    pulling a value back through ``transform.inverse``. ``form`` is
    ``"auto"``, ``"interval"`` or ``"predicate"``.
    """
    schedule = as_schedule(schedule)
    interval_input = isinstance(schedule, (ConstantInterval, VaryingInterval))
    if form not in ("auto", "interval", "predicate"):
        raise DomainError(f"unknown form {form!r}")
    if form != "predicate" and interval_input and transform.increasing:
        floor = None
        if isinstance(schedule, VaryingInterval) and schedule.floor is not None:
            floor = None  # the image of a constant floor is not constant under a time-varying G
        return VaryingInterval(lambda s: transform.forward(u + np.asarray(s), schedule.lower(s)),
                               floor=floor)
    if form == "interval":
        raise UnsupportedFormError("interval form needs an interval schedule and an increasing "
                                   "transform")
    if transform.inverse is None:
        raise UnsupportedFormError("predicate form needs transform.inverse")
    return GeneralRegion(lambda s, x: schedule.contains(s, transform.inverse(u + s, x)))


@dataclass(frozen=True)
class MarginalModel:
    """Weibull marginal with periodic, piecewise-constant scale and shape.

    ``scale[p]`` and ``shape[p]`` apply at every ``t`` with
    ``(t + phase_offset) mod period == p``. A period of 1 is the stationary
    Weibull distribution.
    """

    scale: np.ndarray
    shape: np.ndarray
    phase_offset: int = 0

    def __post_init__(self):
        scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
        shape = np.atleast_1d(np.asarray(self.shape, dtype=float))
        if scale.shape != shape.shape or scale.ndim != 1:
            raise DomainError("scale and shape must be 1-D arrays of equal length")
        if not (np.all(scale > 0) and np.all(shape > 0)):
            raise DomainError("Weibull scale and shape must be positive")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def constant(cls, scale, shape):
        return cls(scale=[scale], shape=[shape])

    @property
    def period(self):
        return len(self.scale)

    def phase(self, t):
        return np.mod(np.asarray(t) + self.phase_offset, self.period)

    def params(self, t):
        p = self.phase(t)
        return self.scale[p], self.shape[p]

    def cumulative_hazard(self, t, x):
        """``(x / lambda_t) ** k_t`` for ``x > 0`` and 0 otherwise."""
        lam, k = self.params(t)
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.maximum(x, 0) / lam, 0.0) ** k

    def cdf(self, t, x):
        return -np.expm1(-self.cumulative_hazard(t, x))

    def sf(self, t, x):
        return np.exp(-self.cumulative_hazard(t, x))

    def quantile(self, t, p):
        lam, k = self.params(t)
        return lam * (-np.log1p(-np.asarray(p, dtype=float))) ** (1.0 / k)

    def isf(self, t, q):
        lam, k = self.params(t)
        return lam * (-np.log(np.asarray(q, dtype=float))) ** (1.0 / k)

    def mean(self, t=0):
        lam, k = self.params(t)
        return lam * np.exp(gammaln(1.0 + 1.0 / k))

    def rvs(self, size, seed=None, t0=0):
        from ._validation import make_rng
        u = make_rng(seed).random(size)
        return self.quantile(t0 + np.arange(size), u)

    def to_dict(self):
        return {"period": self.period, "lambda": self.scale.tolist(), "k": self.shape.tolist()}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc):
        model = cls(scale=doc["lambda"], shape=doc["k"])
        if model.period != int(doc["period"]):
            raise DataError(f"period {doc['period']} does not match {model.period} phase entries")
        return model

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def nonstat_mean_exceedance(series, marginal, b, level=0.95, max_lag=None, taper=None):
    """Mean exceedance time of ``(b, inf)`` for a series with a seasonal marginal.

    Works on ``U_t = F_t(V_t)`` with thresholds ``alpha_s = F_s(b)``; the
    schedule is indexed by the offset ``s``, so the result is the mean
    exceedance time for a start at phase 0 of the marginal.
    """
    values = check_series(series)
    if len(values) % marginal.period:
        warnings.warn(f"series length {len(values)} is not a multiple of the marginal period "
                      f"{marginal.period}", RuntimeWarning, stacklevel=2)
    transform = marginal_transform(marginal)
    U = transform_series(values, transform)
    alpha = transformed_threshold(ConstantInterval(b), transform, u=0)
    times = looped_hitting_times(U, alpha)
    if not np.isfinite(times).all():
        return _infinite_estimate(len(values), level)
    return interval_from_times(times, level, max_lag, taper)


def _infinite_estimate(T, level):
    from .uncertainty import ExceedanceEstimate
    return ExceedanceEstimate(point=math.inf, std_error=math.inf, ci=(math.inf, math.inf),
                              level=level, n_used=T, n_censored_resolved=0, max_lag_used=0)


def weibull_moment_ratio(k):
    """``Gamma(1 + 1/k)^2 / Gamma(1 + 2/k)``, increasing from 0 to 1 in ``k``."""
    k = np.asarray(k, dtype=float)
    return np.exp(2.0 * gammaln(1.0 + 1.0 / k) - gammaln(1.0 + 2.0 / k))


def shape_from_moment_ratio(ratio, lo=0.1, hi=50.0, tol=1e-10):
    """Invert :func:`weibull_moment_ratio` by bisection on ``[lo, hi]``.

    Ratios above the value at ``hi`` are clipped to ``hi`` with a warning;
    ratios outside ``(0, 1)`` raise :class:`FitError`.
    """
    ratio = np.atleast_1d(np.asarray(ratio, dtype=float))
    bad = ~((ratio > 0) & (ratio < 1))
    if bad.any():
        raise FitError(f"moment ratio {ratio[bad][0]:.6g} outside (0, 1) at phase "
                       f"{int(np.flatnonzero(bad)[0])}: no Weibull shape matches")
    r_lo, r_hi = weibull_moment_ratio(lo), weibull_moment_ratio(hi)
    if np.any(ratio > r_hi) or np.any(ratio < r_lo):
        warnings.warn(f"moment ratio outside the range reachable for k in [{lo}, {hi}]; "
                      "shape clipped", RuntimeWarning, stacklevel=2)
    a = np.full(ratio.shape, lo)
    b = np.full(ratio.shape, hi)
    while True:
        mid = 0.5 * (a + b)
        f = weibull_moment_ratio(mid)
        below = f < ratio
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
        if np.all(np.abs(weibull_moment_ratio(0.5 * (a + b)) - ratio) < tol) or \
                np.all(b - a < 1e-14 * b):
            return 0.5 * (a + b)


def circular_smooth(y, weights, bandwidth, degree=2):
    """Weighted local-polynomial smoother on a circle of ``len(y)`` equally spaced phases.

    A Gaussian kernel in circular phase distance, truncated at four
    bandwidths, weights the neighbours; the fitted local polynomial's
    intercept is returned for each phase.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    Y = len(y)
    half = min(Y // 2, int(math.ceil(4 * bandwidth)))
    offsets = np.arange(-half, half + 1)
    if Y % 2 == 0 and half == Y // 2:
        offsets = offsets[:-1]
    kern = np.exp(-0.5 * (offsets / bandwidth) ** 2)
    moments = np.zeros((2 * degree + 1, Y))
    rhs = np.zeros((degree + 1, Y))
    for d, kd in zip(offsets, kern):
        wd = kd * np.roll(w, -d)
        yd = np.roll(y, -d)
        powers = float(d) ** np.arange(2 * degree + 1)
        moments += powers[:, None] * wd[None, :]
        rhs += powers[:degree + 1, None] * (wd * yd)[None, :]
    out = np.empty(Y)
    for p in range(Y):
        gram = np.array([[moments[i + j, p] for j in range(degree + 1)]
                         for i in range(degree + 1)])
        coef = np.linalg.lstsq(gram, rhs[:, p], rcond=None)[0]
        out[p] = coef[0]
    return out


def fit_seasonal_weibull(series, period, bandwidth=None, start_phase=0):
    """Periodic Weibull marginal from smoothed phase moments.

    ``E[V_t]`` and ``E[V_t^2]`` are estimated per phase and smoothed with
    :func:`circular_smooth`; the shape solves
    ``Gamma(1+1/k)^2 / Gamma(1+2/k) = E[V]^2 / E[V^2]`` and the scale follows
    from ``E[V] = lambda Gamma(1 + 1/k)``. ``bandwidth`` is in phase units
    and defaults to ``period / 50`` (at least 1).
    """
    values = check_series(series)
    period = int(period)
    if period < 2:
        raise DomainError(f"period must be at least 2, got {period}")
    if len(values) < 2 * period:
        warnings.warn(f"series shorter than two periods ({len(values)} < {2 * period})",
                      RuntimeWarning, stacklevel=2)
    if bandwidth is None:
        bandwidth = max(1.0, period / 50.0)
    phase = np.mod(np.arange(len(values)) + start_phase, period)
    counts = np.bincount(phase, minlength=period).astype(float)
    if np.any(counts == 0):
        raise FitError("some phases have no observations")
    m1 = np.bincount(phase, weights=values, minlength=period) / counts
    m2 = np.bincount(phase, weights=values * values, minlength=period) / counts
    m1 = circular_smooth(m1, counts, bandwidth)
    m2 = circular_smooth(m2, counts, bandwidth)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = m1 * m1 / m2
    k = shape_from_moment_ratio(ratio)
    lam = m1 / np.exp(gammaln(1.0 + 1.0 / k))
    return MarginalModel(scale=lam, shape=k, phase_offset=start_phase)
