"""Survival curves, cross moments and CLT confidence intervals for hitting times.

The interval for the mean exceedance time uses the normal limit of the
looped estimator. Its variance is estimated from the lag expansion
``Var(sum tau) = T c(0) + 2 sum_i c(i) (T - i)`` truncated at a finite lag.
Validity rests on the hitting-time process being strongly mixing with
uniformly integrable normalised sums (or a Lyapunov-type moment and mixing
rate condition); these cannot be checked from a single path and are
assumed.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, InfiniteMomentError
from .hitting import as_schedule, looped_hitting_times


@dataclass(frozen=True)
class ExceedanceEstimate:
    """Point estimate of the mean exceedance time with its normal-theory interval."""

    point: float
    std_error: float
    ci: tuple
    level: float
    n_used: int
    n_censored_resolved: int
    max_lag_used: int
    variance_clamped: bool = False
    lag_rule: str = "default"
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def finite(self):
        return math.isfinite(self.point)

    def as_dict(self):
        return {"point": self.point, "std_error": self.std_error, "ci_lo": self.ci[0],
                "ci_hi": self.ci[1], "level": self.level, "n_used": self.n_used,
                "n_censored_resolved": self.n_censored_resolved,
                "max_lag_used": self.max_lag_used, "variance_clamped": self.variance_clamped,
                "lag_rule": self.lag_rule}


def default_max_lag(T):
    """Truncation lag ``ceil(10 log10 T)``, capped at ``T - 1``."""
    return int(min(max(T - 1, 0), math.ceil(10 * math.log10(max(T, 1)))))


def _correlation_cutoff(rho, T, c=2.0):
    """Smallest ``m`` after which ``K`` consecutive sample autocorrelations are negligible.

    Negligible means below ``c * sqrt(log10(T) / T)``, with
    ``K = max(5, sqrt(log10 T))``.
    """
    K = max(5, int(math.sqrt(math.log10(T))))
    small = (np.abs(rho[1:]) < c * math.sqrt(math.log10(T) / T)).astype(int)
    if len(small) < K:
        return len(rho) - 1
    run = np.convolve(small, np.ones(K, dtype=int), mode="valid")
    ok = np.flatnonzero(run == K)
    return int(ok[0]) if ok.size else (len(rho) - 1) // 2


def auto_max_lag(times):
    """Data-driven truncation lag, twice the empirical correlation cutoff.

    Looped hitting times fall linearly between visits, so their
    autocorrelation persists over roughly a return period and the default
    ``ceil(10 log10 T)`` lag under-covers once return periods exceed a few
    steps. Meant to be paired with the flat-top taper.
    """
    times = np.asarray(times, dtype=float)
    T = len(times)
    if T < 3:
        return max(T - 1, 0)
    acov = _autocovariances(times - times.mean(), T - 1)
    if acov[0] == 0:
        return 0
    return int(min(T - 1, max(1, 2 * _correlation_cutoff(acov / acov[0], T))))


def _resolve_lag(times, max_lag):
    T = len(times)
    if max_lag is None:
        return default_max_lag(T), "default"
    if max_lag == "auto":
        return auto_max_lag(times), "auto"
    L = int(max_lag)
    if not 0 <= L < T:
        raise DomainError(f"max_lag={L} must lie in [0, T) with T={T}")
    return L, "user"


def _lag_weights(L, taper):
    lags = np.arange(1, L + 1)
    if taper in (None, False, "none"):
        return np.ones(L)
    if taper in (True, "bartlett"):
        return 1.0 - lags / (L + 1.0)
    if taper == "flat-top":
        return np.clip(2.0 * (1.0 - lags / max(L, 1)), 0.0, 1.0)
    raise DomainError(f"unknown taper {taper!r}")


def _finite_times(series, schedule):
    times = looped_hitting_times(series, as_schedule(schedule))
    if not np.isfinite(times).all():
        raise InfiniteMomentError("some looped hitting time is infinite; moments are undefined")
    return times


def survival_curve_estimate(series, schedule, s_grid):
    """``(1/T) sum_t 1(tau_hat(t) > s)`` for each ``s`` in ``s_grid``.

    Infinite hitting times count as exceeding every ``s``.
    """
    times = looped_hitting_times(series, as_schedule(schedule))
    s_grid = np.asarray(s_grid)
    if np.any(s_grid < 0):
        raise DomainError("s_grid must be nonnegative")
    ordered = np.sort(times)
    below = np.searchsorted(ordered, s_grid, side="right")
    return (len(times) - below) / len(times)


def _cross_moment(times, lag):
    T = len(times)
    return float(np.dot(times[:T - lag], times[lag:])) / T


def cross_moment_estimate(series, schedule, lag):
    """``(1/T) sum_{t=i}^{T-1} tau_hat(t-i) tau_hat(t)`` (a raw, uncentred moment)."""
    times = _finite_times(series, schedule)
    if not 0 <= lag < len(times):
        raise DomainError(f"lag={lag} must lie in [0, T)")
    return _cross_moment(times, int(lag))


def _autocovariances(centered, L):
    """``(1/T) sum_t x_{t-i} x_t`` for ``i = 0..L`` by zero-padded FFT."""
    T = len(centered)
    n = 1 << (2 * T - 1).bit_length()
    freq = np.fft.rfft(centered, n)
    acov = np.fft.irfft(freq * np.conj(freq), n)[:L + 1] / T
    acov[0] = float(np.dot(centered, centered)) / T
    return acov


def variance_from_times(times, max_lag=None, taper=None):
    """Variance of ``sum_t tau(t)`` from finite looped times.

    Returns ``(variance, lag, rule, clamped)``. ``taper`` is ``None`` (plain
    truncation), ``"bartlett"`` (weights ``1 - i/(L+1)``, never negative;
    ``True`` is accepted as an alias) or ``"flat-top"`` (weight 1 up to
    ``L/2``, then linear to 0 at ``L``). With ``max_lag="auto"`` the taper
    defaults to flat-top.
    """
    times = np.asarray(times, dtype=float)
    T = len(times)
    L, rule = _resolve_lag(times, max_lag)
    if rule == "auto" and taper is None:
        taper = "flat-top"
    centered = times - times.mean()
    acov = _autocovariances(centered, L)
    lags = np.arange(1, L + 1)
    weights = (T - lags) * _lag_weights(L, taper)
    var = T * acov[0] + 2.0 * float(np.dot(acov[1:], weights))
    if taper not in (None, False, "none"):
        rule = f"{rule}/{'bartlett' if taper is True else taper}"
    clamped = var < 0
    if clamped:
        warnings.warn(f"negative variance estimate {var:.3g} clamped to 0 at max_lag={L}",
                      RuntimeWarning, stacklevel=3)
        var = 0.0
    return var, L, rule, clamped


def clt_variance(series, schedule, max_lag=None, taper=None):
    """Estimated variance of the sum of hitting times over the record.

    ``max_lag`` is an int, ``None`` for ``ceil(10 log10 T)``, or ``"auto"``
    for :func:`auto_max_lag`; see :func:`variance_from_times` for
    ``taper``. Autocovariances are centred at the same-run mean before
    entering the lag expansion.
    """
    return variance_from_times(_finite_times(series, schedule), max_lag, taper)[0]


def normal_quantile(p):
    return float(ndtri(p))


def interval_from_times(times, level=0.95, max_lag=None, taper=None):
    """:class:`ExceedanceEstimate` from precomputed looped hitting times."""
    times = np.asarray(times, dtype=float)
    if not 0.0 <= level < 1.0:
        raise DomainError(f"level={level} must lie in [0, 1)")
    if not np.isfinite(times).all():
        raise InfiniteMomentError("mean exceedance estimate is infinite; interval undefined")
    T = len(times)
    point = int(times.astype(np.int64).sum()) / T
    var, L, rule, clamped = variance_from_times(times, max_lag, taper)
    se = math.sqrt(var) / T
    half = normal_quantile((1.0 + level) / 2.0) * se
    resolved = int(np.count_nonzero(times >= T - np.arange(T)))
    return ExceedanceEstimate(point=point, std_error=se, ci=(point - half, point + half),
                              level=level, n_used=T, n_censored_resolved=resolved,
                              max_lag_used=L, variance_clamped=bool(clamped), lag_rule=rule)


def confidence_interval(series, schedule, level=0.95, max_lag=None, taper=None):
    """Point estimate and normal confidence interval for the mean exceedance time.

    Raises :class:`InfiniteMomentError` when the estimate is infinite.
    """
    times = looped_hitting_times(series, as_schedule(schedule))
    return interval_from_times(times, level, max_lag, taper)
