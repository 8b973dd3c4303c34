"""Return periods of threshold exceedances for dependent and seasonal time series.

The core estimator wraps each record around itself so that right-censored
hitting times are always resolved, and comes with a normal confidence
interval, a reduction for seasonal data and calibrated process models to
compare against.
"""

__version__ = "0.1.0"

from .calibration import (AcfModelParams, FitReport, TransformApprox, correlation_transform_numeric,
                          correlation_transform_parametric, empirical_acf, fit_acf_model,
                          fit_ar1_theta, fit_t_copula, fit_transform_params, fit_weibull)
from .errors import (CensoredTransitError, ConfigError, CovarianceError, DataError, DomainError,
                     ExceedanceError, FitError, InfiniteMomentError, NumericError,
                     ParameterError, UndefinedStatisticError, UnsupportedFormError)
from .estimators import AcfModelRegressor, ExceedanceTimeEstimator, SeasonalWeibullTransformer
from .hitting import (ConstantInterval, GeneralRegion, RunDecomposition, ThresholdSchedule,
                      VaryingInterval, closed_form_mean, discard_censored_estimate,
                      discrepancy_bound, hitting_time, looped_hitting_time, looped_hitting_times,
                      mean_exceedance_estimate, raw_hitting_times, run_decomposition,
                      run_length_moment, transit_time)
from .nonstat import (MarginalModel, TimeTransform, fit_seasonal_weibull, marginal_transform,
                      nonstat_mean_exceedance, scale_transform, transform_series,
                      transformed_threshold)
from .timeseries import TimeSeries
from .uncertainty import (ExceedanceEstimate, auto_max_lag, clt_variance, confidence_interval,
                          cross_moment_estimate, default_max_lag, survival_curve_estimate)
