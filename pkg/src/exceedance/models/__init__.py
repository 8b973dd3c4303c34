"""Process simulators, analytic return periods and extremal statistics."""

from .analytic import (iid_mean_exceedance, ou_mean_exceedance, ou_phi_series,
                       weibull_normal_score)
from .extremes import (AcfFunction, ClusterSize, ExponentialAcf, GeometricAcf, PairCounts,
                       PowerAcf, ProcessModel, TransformedAcf, WhiteAcf, cluster_size_estimate,
                       exceedance_probability, pair_counts, t_copula_rho_for_tail,
                       t_copula_rho_for_tail_probability, t_copula_tail_dependence,
                       t_copula_tail_probability, tail_dependence_estimate,
                       upcrossing_rate_estimate)
from .simulate import (ar1_filter, seasonal_scale, simulate_ar1, simulate_gaussian_acf,
                       simulate_seasonal_scaled_ar1, simulate_t_markov, t_markov_from_uniforms)
