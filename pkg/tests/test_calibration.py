import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from exceedance import (AcfModelParams, TransformApprox, correlation_transform_numeric,
                        correlation_transform_parametric, empirical_acf, fit_acf_model,
                        fit_ar1_theta, fit_t_copula, fit_transform_params, fit_weibull)
from exceedance.errors import DomainError, FitError
from exceedance.experiments import load_fixtures
from exceedance.models import (PowerAcf, simulate_ar1, simulate_t_markov, t_copula_rho_for_tail,
                               t_copula_tail_dependence)
from exceedance.nonstat import MarginalModel

FX = load_fixtures()
W = (FX["weibull"]["scale"], FX["weibull"]["shape"])
FIXTURE_T = TransformApprox(**FX["transform"])


class TestWeibullFit:
    def test_recovers_fixture(self):
        x = W[0] * np.random.default_rng(0).weibull(W[1], 10 ** 6)
        scale, shape = fit_weibull(x)
        assert abs(scale / W[0] - 1) <= 0.01 and abs(shape / W[1] - 1) <= 0.01

    def test_exponential(self):
        _, shape = fit_weibull(np.random.default_rng(1).exponential(3.0, 200000))
        assert abs(shape - 1) <= 0.02

    def test_matches_scipy_mle(self):
        x = 4 * np.random.default_rng(2).weibull(1.7, 5000)
        shape, _, scale = stats.weibull_min.fit(x, floc=0)
        got = fit_weibull(x)
        assert got[0] == pytest.approx(scale, rel=1e-5) and got[1] == pytest.approx(shape, rel=1e-5)

    def test_scale_equivariance(self):
        x = np.random.default_rng(3).weibull(2.0, 10000)
        s1, a1 = fit_weibull(x)
        s2, a2 = fit_weibull(7.5 * x)
        assert s2 == pytest.approx(7.5 * s1, rel=1e-9) and a2 == pytest.approx(a1, rel=1e-9)

    def test_drops_zeros_and_rejects_constants(self):
        with pytest.warns(RuntimeWarning, match="dropped 1"):
            fit_weibull([0.0, 1.0, 2.0, 3.5])
        with pytest.raises(FitError):
            fit_weibull([2.0, 2.0, 2.0])


class TestEmpiricalAcf:
    def test_against_loop(self):
        x = np.random.default_rng(0).normal(size=500)
        got = empirical_acf(x, 5)
        c = x - x.mean()
        expected = [sum(c[t] * c[t + k] for t in range(500 - k)) / np.dot(c, c) for k in range(6)]
        np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-14)
        assert got[0] == 1.0

    def test_iid_and_ar1(self):
        T = 10 ** 6
        assert abs(empirical_acf(np.random.default_rng(1).normal(size=T), 1)[1]) < 3 / math.sqrt(T)
        assert abs(empirical_acf(simulate_ar1(0.97, T, seed=5), 1)[1] - 0.97) <= 0.005

    def test_lag_bound(self):
        with pytest.raises(DomainError):
            empirical_acf([1.0, 2.0, 3.0], 3)


class TestAcfModelFit:
    lags = np.arange(1, 101)

    @pytest.mark.parametrize("key", ["acf", "acf2"])
    def test_noisy_recovery(self, key):
        truth = FX[key]
        values = PowerAcf(**truth)(self.lags)
        noisy = values + np.random.default_rng(0).normal(0, 0.002, len(self.lags))
        p = fit_acf_model(noisy, self.lags)
        for name in ("zeta", "eta", "kappa"):
            assert abs(getattr(p, name) / truth[name] - 1) <= 0.05

    def test_exact_values(self):
        values = PowerAcf(**FX["acf"])(self.lags)
        p, report = fit_acf_model(values, self.lags, return_report=True)
        assert report.residual < 1e-10
        assert p(0) == 1.0 and np.all(np.diff(p(np.arange(50))) < 0)

    def test_needs_three_points(self):
        with pytest.raises(DomainError):
            fit_acf_model([0.9, 0.8], [1, 2])


class TestCorrelationTransform:
    def test_fixed_points_with_weibull_moments(self):
        assert abs(correlation_transform_numeric(0.0, W)) < 1e-6
        assert abs(correlation_transform_numeric(1.0, W) - 1) < 1e-6

    def test_gaussian_identity(self):
        rho = np.linspace(-0.9, 0.99, 20)
        np.testing.assert_allclose(correlation_transform_numeric(rho, None), rho, atol=1e-12)

    def test_against_scipy_dblquad(self):
        r = 0.6
        g = lambda v: W[0] * (-np.log(stats.norm.sf(v))) ** (1 / W[1])  # noqa: E731
        dens = stats.multivariate_normal([0, 0], [[1, r], [r, 1]]).pdf
        cross = integrate.dblquad(lambda y, x: g(x) * g(y) * dens([x, y]), -9, 9, -9, 9,
                                  epsabs=1e-9)[0]
        m = W[0] * math.gamma(1 + 1 / W[1])
        v = W[0] ** 2 * math.gamma(1 + 2 / W[1]) - m * m
        assert correlation_transform_numeric(r, W) == pytest.approx((cross - m * m) / v, abs=1e-6)

    def test_monotone_and_converged(self):
        rho = np.linspace(0.0, 0.99, 60)
        a = correlation_transform_numeric(rho, W, quad_order=80)
        b = correlation_transform_numeric(rho, W, quad_order=160)
        assert np.all(np.diff(a) > 0)
        assert np.max(np.abs(a - b)) < 1e-6

    def test_constant_marginal_model_accepted(self):
        m = MarginalModel.constant(*W)
        assert correlation_transform_numeric(0.5, m) == correlation_transform_numeric(0.5, W)

    def test_parametric_approximation_at_half(self):
        assert abs(correlation_transform_numeric(0.5, W) - FIXTURE_T.forward(0.5)) <= 0.02

    def test_quad_order_floor(self):
        with pytest.raises(DomainError):
            correlation_transform_numeric(0.5, W, quad_order=10)


class TestTransformApprox:
    def test_endpoints_and_inverse(self):
        assert FIXTURE_T.forward(0.0) == 0.0 and FIXTURE_T.forward(1.0) == 1.0
        rho = np.linspace(0.1, 0.9, 9)
        np.testing.assert_allclose(FIXTURE_T.inverse(FIXTURE_T.forward(rho)), rho, atol=1e-12)
        assert correlation_transform_parametric(0.3, FIXTURE_T, "inverse") == FIXTURE_T.inverse(0.3)
        with pytest.raises(DomainError):
            correlation_transform_parametric(0.3, FIXTURE_T, "sideways")

    def test_latent_lag_one(self):
        latent = FIXTURE_T.inverse(PowerAcf(**FX["acf"])(1))
        assert abs(latent - math.exp(-0.014)) < 2e-4

    def test_fit_reproduces_numeric_curve(self):
        params, report = fit_transform_params(W, return_report=True)
        grid = np.linspace(0.05, 0.99, 200)
        err = np.max(np.abs(params.forward(grid) - correlation_transform_numeric(grid, W)))
        assert err <= 0.02 and report.residual <= 0.02

    def test_fit_gaussian_is_identity(self):
        p = fit_transform_params(None)
        grid = np.linspace(0.05, 0.99, 50)
        assert np.max(np.abs(p.forward(grid) - grid)) < 0.01

    def test_fit_is_a_fixed_point(self):
        grid = np.linspace(0.05, 0.99, 48)
        p = TransformApprox(0.3, 0.6)
        target = p.forward(grid)
        res = optimize.least_squares(lambda q: TransformApprox(*q).forward(grid) - target,
                                     (0.2, 0.5), method="lm", xtol=1e-15, ftol=1e-15)
        np.testing.assert_allclose(res.x, (0.3, 0.6), atol=1e-6)

    def test_invalid(self):
        with pytest.raises(DomainError):
            TransformApprox(-1.5, 0.3)
        with pytest.raises(DomainError):
            TransformApprox(0.1, 0.0)


class TestAr1Theta:
    def test_fixture_target(self):
        theta = fit_ar1_theta(PowerAcf(**FX["acf"]), FIXTURE_T)
        assert abs(theta - 0.027) <= 0.002

    def test_self_consistency(self):
        target = lambda n: FIXTURE_T.forward(np.exp(-0.05 * np.asarray(n)))  # noqa: E731
        assert abs(fit_ar1_theta(target, FIXTURE_T) - 0.05) <= 1e-4

    def test_lag_one_comparator_roughly_halves(self):
        full = fit_ar1_theta(PowerAcf(**FX["acf"]), FIXTURE_T)
        one = fit_ar1_theta(PowerAcf(**FX["acf"]), FIXTURE_T, lag_one_only=True)
        assert abs(one - 0.014) <= 0.001 and 0.4 < one / full < 0.6

    def test_latent_acf_lies_below_geometric_extrapolation(self):
        acf = PowerAcf(**FX["acf"])
        t = np.arange(2, 101)
        lhs = FIXTURE_T.inverse(acf(t))
        rhs = FIXTURE_T.inverse(acf(1)) ** t
        assert np.all(lhs < rhs)

    def test_params_object_accepted(self):
        p = AcfModelParams(**FX["acf"])
        assert fit_ar1_theta(p, FIXTURE_T) == fit_ar1_theta(PowerAcf(**FX["acf"]), FIXTURE_T)


class TestTCopulaFit:
    def test_constraint_solver(self):
        assert abs(t_copula_rho_for_tail(13.4, 0.615) - 0.964) < 0.001

    def test_gaussian_limit_forces_finite_nu(self):
        lams = [t_copula_tail_dependence(nu, 0.964) for nu in (10, 100, 1000, 10000)]
        assert all(a > b for a, b in zip(lams, lams[1:])) and lams[-1] < 1e-6

    def test_undefined_constraint(self):
        u = np.random.default_rng(0).uniform(0.01, 0.5, 1000)
        with pytest.raises(FitError):
            fit_t_copula(u, horizon=10, sim_length=1000)
        with pytest.raises(DomainError):
            fit_t_copula(u, tail_constraint="other")

    @pytest.fixture(scope="class")
    @classmethod
    def recovery(cls):
        nu, rho = FX["t_copula"]["nu"], FX["t_copula"]["rho_t"]
        u = stats.t.cdf(simulate_t_markov(nu, rho, 10 ** 6, seed=1), nu)
        return fit_t_copula(u, sim_length=10 ** 6, seed=0, return_report=True)

    @pytest.mark.slow
    def test_recovers_correlation(self, recovery):
        (nu, rho), report = recovery
        assert abs(rho - FX["t_copula"]["rho_t"]) <= 0.01
        assert report.diagnostics["tail_constraint"] == "limit"

    @pytest.mark.slow
    def test_recovers_degrees_of_freedom(self, recovery):
        (nu, rho), _ = recovery
        assert abs(nu - FX["t_copula"]["nu"]) <= 3
