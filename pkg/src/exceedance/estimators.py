"""Scikit-learn style wrappers around the estimation and calibration routines."""

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_series
from .calibration import empirical_acf, fit_acf_model
from .errors import DomainError
from .hitting import looped_hitting_times
from .nonstat import fit_seasonal_weibull, nonstat_mean_exceedance
from .uncertainty import ExceedanceEstimate, interval_from_times


def _as_1d(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    return check_series(X)


class ExceedanceTimeEstimator(BaseEstimator):
    """Mean exceedance time of a single record over a grid of thresholds.

    Parameters
    ----------
    thresholds : array-like
        Thresholds ``b`` evaluated by :meth:`fit`.
    level : float
        Confidence level of the normal intervals.
    max_lag : int, "auto" or None
        Truncation lag of the variance estimate; see
        :func:`~exceedance.uncertainty.variance_from_times`.
    taper : str or None
        Lag-window taper passed to the variance estimate.
    marginal : MarginalModel or None
        When given, thresholds are mapped through the seasonal marginal
        before the looped estimator is applied.

    Attributes
    ----------
    estimates_ : list of ExceedanceEstimate
    return_periods_ : ndarray
        Point estimates, ``inf`` where no exceedance occurred.
    """

    def __init__(self, thresholds=(0.0,), level=0.95, max_lag=None, taper=None, marginal=None):
        self.thresholds = thresholds
        self.level = level
        self.max_lag = max_lag
        self.taper = taper
        self.marginal = marginal

    def _estimate(self, values, b):
        if self.marginal is not None:
            return nonstat_mean_exceedance(values, self.marginal, b, self.level, self.max_lag,
                                           self.taper)
        times = looped_hitting_times(values, float(b))
        if not np.isfinite(times).all():
            return ExceedanceEstimate(point=math.inf, std_error=math.inf,
                                      ci=(math.inf, math.inf), level=self.level,
                                      n_used=len(values), n_censored_resolved=0, max_lag_used=0)
        return interval_from_times(times, self.level, self.max_lag, self.taper)

    def fit(self, X, y=None):
        values = _as_1d(X)
        grid = np.atleast_1d(np.asarray(self.thresholds, dtype=float))
        if np.any(np.diff(grid) <= 0):
            raise DomainError("thresholds must be strictly increasing")
        self.thresholds_ = grid
        self.estimates_ = [self._estimate(values, b) for b in grid]
        self.return_periods_ = np.array([e.point for e in self.estimates_])
        self.n_samples_ = len(values)
        return self

    def predict(self, b):
        """Return periods at the fitted thresholds ``b`` (exact matches only)."""
        check_is_fitted(self, "estimates_")
        b = np.atleast_1d(np.asarray(b, dtype=float))
        idx = np.minimum(np.searchsorted(self.thresholds_, b), len(self.thresholds_) - 1)
        ok = self.thresholds_[idx] == b
        if not ok.all():
            raise DomainError(f"threshold {b[~ok][0]} was not part of the fitted grid")
        return self.return_periods_[idx]

    def confidence_intervals(self):
        check_is_fitted(self, "estimates_")
        return np.array([e.ci for e in self.estimates_])


class SeasonalWeibullTransformer(TransformerMixin, BaseEstimator):
    """Map a seasonal record to uniforms with a fitted periodic Weibull marginal.

    Parameters
    ----------
    period : int
        Season length in samples.
    bandwidth : float or None
        Phase bandwidth of the circular smoother.
    start_phase : int
        Phase of the first sample.
    """

    def __init__(self, period=2, bandwidth=None, start_phase=0):
        self.period = period
        self.bandwidth = bandwidth
        self.start_phase = start_phase

    def fit(self, X, y=None):
        self.marginal_ = fit_seasonal_weibull(_as_1d(X), self.period, self.bandwidth,
                                              self.start_phase)
        return self

    def transform(self, X):
        check_is_fitted(self, "marginal_")
        values = _as_1d(X)
        return self.marginal_.cdf(np.arange(len(values)), values)

    def inverse_transform(self, X):
        check_is_fitted(self, "marginal_")
        u = np.asarray(X, dtype=float).ravel()
        return self.marginal_.quantile(np.arange(len(u)), u)


class AcfModelRegressor(RegressorMixin, BaseEstimator):
    """Power-law autocorrelation model fitted to lag/correlation pairs.

    ``fit(lags, acf)`` follows the regressor convention with lags as the
    single feature. :meth:`fit_series` fits the sample ACF of a record.
    """

    def __init__(self, starts=None):
        self.starts = starts

    def fit(self, X, y):
        lags = np.asarray(X, dtype=float).ravel()
        self.params_, self.report_ = fit_acf_model(y, lags, self.starts, return_report=True)
        return self

    def fit_series(self, series, max_lag=100):
        acf = empirical_acf(series, max_lag)
        return self.fit(np.arange(1, max_lag + 1), acf[1:])

    def predict(self, X):
        check_is_fitted(self, "params_")
        return self.params_(np.asarray(X, dtype=float).ravel())

    @property
    def params_tuple_(self):
        check_is_fitted(self, "params_")
        return self.params_.zeta, self.params_.eta, self.params_.kappa
