import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from exceedance import looped_hitting_times
from exceedance.errors import (CovarianceError, DomainError, ParameterError,
                               UndefinedStatisticError)
from exceedance.experiments import load_fixtures
from exceedance.models import (ExponentialAcf, GeometricAcf, PowerAcf, ProcessModel,
                               TransformedAcf, WhiteAcf, AcfFunction, cluster_size_estimate,
                               exceedance_probability, iid_mean_exceedance, ou_mean_exceedance,
                               ou_phi_series, pair_counts, seasonal_scale, simulate_ar1,
                               simulate_gaussian_acf, simulate_seasonal_scaled_ar1,
                               simulate_t_markov, t_copula_rho_for_tail,
                               t_copula_rho_for_tail_probability, t_copula_tail_dependence,
                               t_copula_tail_probability, t_markov_from_uniforms,
                               tail_dependence_estimate, upcrossing_rate_estimate,
                               weibull_normal_score)
from exceedance.nonstat import MarginalModel

from oracles import pair_table

FX = load_fixtures()


def sample_acf(x, lags):
    x = x - x.mean()
    d = np.dot(x, x)
    return np.array([np.dot(x[:-k], x[k:]) / d for k in lags])


class TestAr1:
    def test_white_noise(self):
        T = 100000
        x = simulate_ar1(0.0, T, seed=1)
        assert abs(sample_acf(x, [1])[0]) < 3 / math.sqrt(T)

    def test_lag_one_high_persistence(self):
        assert abs(sample_acf(simulate_ar1(0.97, 10 ** 6, seed=2), [1])[0] - 0.97) <= 0.005

    def test_geometric_acf(self):
        x = simulate_ar1(0.5, 10 ** 6, seed=3)
        np.testing.assert_allclose(sample_acf(x, range(1, 6)), 0.5 ** np.arange(1, 6), atol=0.01)

    def test_stationary_start_and_errors(self):
        starts = np.array([simulate_ar1(0.9, 1, seed=s)[0] for s in range(4000)])
        assert stats.kstest(starts, "norm").pvalue > 1e-3
        with pytest.raises(ParameterError):
            simulate_ar1(1.0, 10, seed=0)

    def test_reproducible(self):
        np.testing.assert_array_equal(simulate_ar1(0.7, 50, 9), simulate_ar1(0.7, 50, 9))


class TestGaussianAcf:
    def test_white(self):
        x = simulate_gaussian_acf(WhiteAcf(), 50000, seed=0)
        assert abs(sample_acf(x, [1])[0]) < 3 / math.sqrt(50000)
        assert abs(x.std() - 1) < 0.02

    def test_matches_ar1_in_law(self):
        lags = [1, 5, 20]
        a = np.mean([sample_acf(simulate_gaussian_acf(GeometricAcf(0.97), 20000, s), lags)
                     for s in range(20)], axis=0)
        b = np.mean([sample_acf(simulate_ar1(0.97, 20000, s + 100), lags) for s in range(20)],
                    axis=0)
        np.testing.assert_allclose(a, b, atol=0.02)
        ta = [looped_hitting_times(simulate_gaussian_acf(GeometricAcf(0.97), 20000, s), 1.5)
              .mean() for s in range(30)]
        tb = [looped_hitting_times(simulate_ar1(0.97, 20000, s + 100), 1.5).mean()
              for s in range(30)]
        se = math.sqrt(np.var(ta, ddof=1) / 30 + np.var(tb, ddof=1) / 30)
        assert abs(np.mean(ta) - np.mean(tb)) <= 3 * se

    def test_power_acf_targets(self):
        acf = PowerAcf(**FX["acf"])
        x = simulate_gaussian_acf(acf, 10 ** 5, seed=0)
        lags = [1, 10, 50]
        np.testing.assert_allclose(sample_acf(x, lags), acf(np.array(lags)), atol=0.02)

    def test_invalid_covariance(self):
        bad = lambda s: np.where(np.asarray(s) == 0, 1.0, -0.9)  # noqa: E731
        with pytest.raises(CovarianceError):
            simulate_gaussian_acf(bad, 5000, seed=0)
        with pytest.raises(CovarianceError):
            simulate_gaussian_acf(bad, 50, seed=0)


class TestTMarkov:
    def test_independent_when_uncorrelated(self):
        y = simulate_t_markov(13.4, 0.0, 100000, seed=0)
        assert abs(sample_acf(y, [1])[0]) < 0.01

    def test_marginal_is_stationary(self):
        y = simulate_t_markov(13.4, 0.964, 10 ** 6, seed=0)
        assert stats.kstest(y, "t", args=(13.4,)).statistic < 0.005

    def test_empirical_tail_dependence_at_finite_level(self):
        """Compare with the exact bivariate-t probability at the same finite level."""
        nu, rho, b = 13.4, 0.964, 1 - 1e-4
        u = stats.t.cdf(simulate_t_markov(nu, rho, 10 ** 6, seed=0), nu)
        c = pair_counts(u, b)
        lam = c.n11 / c.n_prev_above
        exact = t_copula_tail_probability(nu, rho, b)
        se = math.sqrt(exact * (1 - exact) / c.n_prev_above) * 3  # clustering inflates the SE
        assert abs(lam - exact) <= 3 * se

    def test_empirical_tail_dependence_literal_value(self):
        nu, rho, b = 13.4, 0.964, 1 - 1e-4
        u = stats.t.cdf(simulate_t_markov(nu, rho, 10 ** 6, seed=0), nu)
        assert abs(tail_dependence_estimate(u, b) - 0.615) <= 0.03

    def test_common_random_numbers_reproduce_chain(self):
        rng = np.random.default_rng(0)
        u = rng.uniform(size=1000)
        a = t_markov_from_uniforms(13.4, 0.9, u)
        assert np.array_equal(a, t_markov_from_uniforms(13.4, 0.9, u))
        assert a[0] == pytest.approx(stats.t.ppf(u[0], 13.4), rel=1e-10)
        with pytest.raises(ParameterError):
            simulate_t_markov(2.0, 0.5, 10, seed=0)


class TestSeasonal:
    def test_scale_as_printed(self):
        assert seasonal_scale(0, 1000) == 0.5
        assert seasonal_scale(500, 1000) == 1.0
        assert seasonal_scale(0, 1000, phase_shift=500) == 1.0
        assert seasonal_scale(1500, 1000) == 1.0

    def test_deseasonalised_lag_one(self):
        Y, T = 1000, 10 ** 6
        v = simulate_seasonal_scaled_ar1(0.7, Y, T, seed=0)
        z = v / seasonal_scale(np.arange(T), Y)
        assert abs(sample_acf(z, [1])[0] - 0.7) <= 0.01

    def test_unit_scale_is_ar1(self):
        v = simulate_seasonal_scaled_ar1(0.7, 10, 500, seed=4, scale=lambda t: np.ones_like(t))
        np.testing.assert_array_equal(v, simulate_ar1(0.7, 500, seed=4))


class TestIid:
    def test_zero(self):
        assert iid_mean_exceedance(0.0, 11.05, 2.19) == 0.0

    def test_monte_carlo(self):
        scale, shape, b = 11.05, 2.19, 20.0
        x = scale * np.random.default_rng(0).weibull(shape, 10 ** 7)
        mc = looped_hitting_times(x, b).mean()
        assert abs(mc / iid_mean_exceedance(b, scale, shape) - 1) <= 0.02

    @given(st.floats(0, 60), st.floats(0.01, 10))
    def test_increasing(self, b, db):
        assert iid_mean_exceedance(b + db, 11.05, 2.19) > iid_mean_exceedance(b, 11.05, 2.19) \
            or iid_mean_exceedance(b, 11.05, 2.19) > 1e300

    def test_normal_score_matches_ppf(self):
        b = np.array([5.0, 20.0, 40.0])
        np.testing.assert_allclose(
            weibull_normal_score(b, 11.05, 2.19),
            stats.norm.ppf(stats.weibull_min.cdf(b, 2.19, scale=11.05)), rtol=1e-9)


class TestOu:
    @pytest.mark.parametrize("theta", [0.01, 0.027, 0.1])
    @pytest.mark.parametrize("z", [1.0, 2.0, 3.0, 4.0])
    def test_series_and_integral_agree(self, theta, z):
        s = ou_mean_exceedance(theta, z, "series")
        i = ou_mean_exceedance(theta, z, "integral")
        assert abs(s / i - 1) < 1e-3

    def test_asymptotic_regime(self):
        s = ou_mean_exceedance(0.027, 4.0, "series")
        assert abs(ou_mean_exceedance(0.027, 4.0, "asymptotic") / s - 1) < 0.10
        with pytest.raises(DomainError):
            ou_mean_exceedance(0.027, -0.5, "asymptotic")

    def test_integral_against_plain_double_quadrature(self):
        theta, z = 0.1, 1.5
        inner = lambda z0: integrate.quad(  # noqa: E731
            lambda t: stats.norm.cdf(t) * math.exp(t * t / 2), z0, z)[0]
        outer = integrate.quad(lambda z0: inner(z0) * stats.norm.pdf(z0), -12, z)[0]
        expected = math.sqrt(2 * math.pi) / theta * outer
        assert ou_mean_exceedance(theta, z) == pytest.approx(expected, rel=1e-7)

    def test_phi_series_derivative(self):
        """``phi'(x) = sqrt(2 pi) Phi(x) exp(x^2/2) / (2 theta)`` up to the series' constant."""
        theta, x, h = 0.05, 0.7, 1e-5
        d = (ou_phi_series(x + h, theta) - ou_phi_series(x - h, theta)) / (2 * h)
        expected = math.sqrt(2 * math.pi) * stats.norm.cdf(x) * math.exp(x * x / 2) / theta
        assert d == pytest.approx(expected, rel=1e-6)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            ou_mean_exceedance(0.0, 1.0)
        with pytest.raises(DomainError):
            ou_mean_exceedance(0.1, 1.0, "bogus")


class TestPairStatistics:
    def test_examples(self):
        assert tail_dependence_estimate([5, 5, 1, 5], 4) == 0.5
        assert tail_dependence_estimate([5, 5, 5], 4) == 1.0
        assert tail_dependence_estimate([5, 1, 5, 1, 5], 4) == 0.0
        assert upcrossing_rate_estimate([1, 5, 1, 5], 4) == pytest.approx(2 / 3)
        assert upcrossing_rate_estimate([3, 3, 3], 4) == 0.0
        assert upcrossing_rate_estimate([5, 5, 5], 4) == 0.0

    def test_undefined(self):
        with pytest.raises(UndefinedStatisticError):
            tail_dependence_estimate([1, 1, 5], 4)

    @given(st.lists(st.integers(0, 5), min_size=2, max_size=40), st.integers(0, 4),
           st.booleans())
    def test_counts_match_loop(self, values, b, circular):
        c = pair_counts(np.array(values, dtype=float), b, circular)
        n = pair_table(values, b, circular)
        assert (c.n00, c.n01, c.n10, c.n11) == (n[0, 0], n[0, 1], n[1, 0], n[1, 1])

    @given(st.lists(st.integers(0, 5), min_size=2, max_size=40), st.integers(0, 4))
    def test_circular_identity_is_exact(self, values, b):
        c = pair_counts(values, b, circular=True)
        if c.n_prev_above == 0:
            return
        # compare as exact rationals: 1 - n11/n1. == n01/n.1 because n01 == n10 on a circle
        assert (c.n_prev_above - c.n11) * c.n_curr_above == c.n01 * c.n_prev_above
        lam = tail_dependence_estimate(values, b, circular=True)
        mu = upcrossing_rate_estimate(values, b, circular=True)
        p = exceedance_probability(values, b, circular=True)
        assert 1 - lam == pytest.approx(mu / p, rel=1e-15, abs=1e-15)


class TestClusterSize:
    def test_example(self):
        assert cluster_size_estimate([1, 5, 5, 1, 5, 1], 4).mean == 1.5

    def test_isolated(self):
        assert float(cluster_size_estimate([1, 5, 1, 5, 1, 5, 1], 4)) == 1.0

    def test_partial_runs_excluded(self):
        with pytest.warns(RuntimeWarning, match="partial"):
            c = cluster_size_estimate([5, 5, 1, 5, 1, 5, 5], 4)
        assert c.mean == 1.0 and c.n_runs == 1 and c.censored_leading and c.censored_trailing

    def test_no_complete_run(self):
        with pytest.raises(UndefinedStatisticError):
            cluster_size_estimate([1, 1, 5, 5], 4)

    @given(st.lists(st.integers(0, 5), min_size=2, max_size=40), st.integers(0, 4))
    def test_reciprocal_relation(self, values, b):
        x = np.array(values, dtype=float)
        if x[0] > b or x[-1] > b or not np.any(x > b):
            return
        c = pair_counts(x, b)
        size = cluster_size_estimate(x, b).mean
        assert 1 / size == pytest.approx(c.n01 / c.n_curr_above, rel=1e-14)


class TestTCopula:
    def test_fixture_value(self):
        lam = t_copula_tail_dependence(13.4, 0.964)
        assert abs(lam - 0.615) <= 0.005 and abs(1 - lam - 0.385) <= 0.005

    def test_limits(self):
        assert t_copula_tail_dependence(5.0, 1.0) == 1.0
        assert t_copula_tail_dependence(5.0, 0.999999) == pytest.approx(1.0, abs=1e-2)

    def test_rho_inverse(self):
        for nu in (4.0, 13.4, 30.0):
            for lam in (0.2, 0.615, 0.9):
                assert t_copula_tail_dependence(nu, t_copula_rho_for_tail(nu, lam)) == \
                    pytest.approx(lam, abs=1e-10)

    def test_finite_level_probability(self):
        nu, rho = 13.4, 0.964
        b = 0.99
        q = stats.t.ppf(b, nu)
        joint = stats.multivariate_t(loc=[0, 0], shape=[[1, rho], [rho, 1]], df=nu)
        both = 1 - 2 * b + joint.cdf([q, q], maxpts=10 ** 7, random_state=0)
        assert t_copula_tail_probability(nu, rho, b) == pytest.approx(both / (1 - b), abs=2e-3)
        p_far = t_copula_tail_probability(nu, rho, 1 - 1e-9)
        assert abs(p_far - t_copula_tail_dependence(nu, rho)) < 0.03
        r = t_copula_rho_for_tail_probability(nu, 0.7, b)
        assert t_copula_tail_probability(nu, r, b) == pytest.approx(0.7, abs=1e-9)


class TestAcfFamilies:
    def test_power_formula(self):
        acf = PowerAcf(10.23, 1.63, 1.38)
        s = np.array([0.0, 1.0, 10.0, 100.0])
        expected = (1 + 1.38 * (s / 10.23) ** 1.63) ** (-1 / (1.63 * 1.38))
        np.testing.assert_allclose(acf(s), expected, rtol=1e-14)
        assert np.all(np.diff(acf(np.arange(200))) < 0)

    def test_geometric_sign(self):
        acf = GeometricAcf(-0.5)
        np.testing.assert_allclose(acf(np.arange(4)), [1, -0.5, 0.25, -0.125])

    def test_transformed_endpoints(self):
        acf = TransformedAcf(ExponentialAcf(0.01), 0.065, 0.373)
        assert acf(0) == 1.0
        assert 0 < acf(10) < 1

    @pytest.mark.parametrize("acf", [PowerAcf(1, 2, 3), GeometricAcf(0.3), ExponentialAcf(0.1),
                                     WhiteAcf(),
                                     TransformedAcf(GeometricAcf(0.9), 0.065, 0.373)])
    def test_round_trip(self, acf):
        back = AcfFunction.from_dict(acf.to_dict())
        np.testing.assert_array_equal(back(np.arange(20)), acf(np.arange(20)))
        assert abs(acf(0)) == 1 and np.all(np.abs(acf(np.arange(50))) <= 1)


class TestProcessModel:
    def test_marginal_mapping(self):
        m = MarginalModel.constant(11.05, 2.19)
        x = ProcessModel("ar1", {"theta": 0.027}, m).simulate(200000, seed=0)
        assert np.all(x > 0)
        assert abs(np.median(x) - 11.05 * math.log(2) ** (1 / 2.19)) < 0.2

    def test_json_round_trip(self):
        model = ProcessModel("gaussian", {"acf": PowerAcf(**FX["acf"])},
                             MarginalModel.constant(11.05, 2.19))
        back = ProcessModel.from_json(model.to_json())
        np.testing.assert_array_equal(back.simulate(300, 1), model.simulate(300, 1))

    def test_validation(self):
        with pytest.raises(ParameterError):
            ProcessModel("ar1", {"theta": -1})
        with pytest.raises(ParameterError):
            ProcessModel("t-markov", {"nu": 1.5, "rho_t": 0.5})
        with pytest.raises(ParameterError):
            ProcessModel("fractal")
        with pytest.raises(DomainError):
            ProcessModel("ou", {"theta": 0.1}).simulate(10, 0)
