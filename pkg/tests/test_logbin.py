import numpy as np
import pytest

from riskratio import (
    build_design_matrix,
    fit_logbin_barrier,
    fit_logbin_ml,
    fit_robust_poisson,
    generate,
    logbin_gradient,
    logbin_hessian,
    logbin_loglik,
    parse_spec,
)
from riskratio.errors import InfeasiblePoint
from riskratio.rng import stream
from riskratio.simlab import get_scenario

from test_eecore import two_by_two


def simple_sample(r, n=1000):
    return generate("simple", n, rng=stream(700, r))


class TestLoglik:
    def test_intercept_only_stationary_at_log_mean(self):
        y = np.r_[np.ones(30), np.zeros(70)]
        X = np.ones((100, 1))
        beta = np.array([np.log(0.3)])
        np.testing.assert_allclose(logbin_gradient(X, y, beta), 0.0, atol=1e-10)

    def test_infeasible_point_raises(self):
        X = np.ones((5, 1))
        with pytest.raises(InfeasiblePoint):
            logbin_loglik(X, np.zeros(5), np.array([0.1]))

    def test_hessian_matches_finite_differences(self):
        rng = stream(51, 0)
        for _ in range(10):
            n = 80
            X = np.column_stack([np.ones(n), rng.standard_normal(n)])
            y = (rng.random(n) < 0.4).astype(float)
            beta = np.array([-1.5, 0.2])
            assert np.max(X @ beta) < 0
            hess = logbin_hessian(X, y, beta)
            fd = np.empty((2, 2))
            for j in range(2):
                h = 1e-6
                bp, bm = beta.copy(), beta.copy()
                bp[j] += h
                bm[j] -= h
                fd[:, j] = (
                    logbin_gradient(X, y, bp) - logbin_gradient(X, y, bm)
                ) / (2 * h)
            np.testing.assert_allclose(hess, fd, rtol=1e-5, atol=1e-4)


class TestMlFitter:
    def test_saturated_2x2_matches_robust_poisson(self):
        data = two_by_two()
        dm = build_design_matrix(data, parse_spec("1 + A"), exposure="A")
        ml = fit_logbin_ml(dm, data.y)
        rp = fit_robust_poisson(dm, data.y)
        assert ml.converged and not ml.on_boundary
        np.testing.assert_allclose(ml.beta[1], np.log(1.5), atol=1e-8)
        np.testing.assert_allclose(ml.beta, rp.beta, atol=1e-8)

    def test_simple_scenario_converges(self):
        terms = parse_spec(get_scenario("simple").simple_spec)
        converged = 0
        for r in range(50):
            data = simple_sample(r)
            dm = build_design_matrix(data, terms, exposure="A")
            fit = fit_logbin_ml(dm, data.y)
            if fit.converged and not fit.on_boundary:
                converged += 1
        assert converged >= 48  # > 95%

    def test_moderate_scenario_mostly_fails(self):
        terms = parse_spec(get_scenario("moderate").simple_spec)
        failed = 0
        for r in range(50):
            data = generate("moderate", 1000, rng=stream(701, r))
            dm = build_design_matrix(data, terms, exposure="A")
            fit = fit_logbin_ml(dm, data.y)
            if not fit.converged or fit.on_boundary or fit.cov_model is None:
                failed += 1
        assert failed > 25

    def test_feasibility_of_reported_fit(self):
        for r in range(10):
            data = generate("complex", 500, rng=stream(702, r))
            dm = build_design_matrix(
                data, parse_spec(get_scenario("complex").simple_spec), exposure="A"
            )
            fit = fit_logbin_ml(dm, data.y)
            assert np.all(np.exp(dm.X @ fit.beta) <= 1.0 + 1e-10)


class TestBarrierFitter:
    def test_intercept_only(self):
        y = np.r_[np.ones(30), np.zeros(70)]
        fit = fit_logbin_barrier(np.ones((100, 1)), y)
        np.testing.assert_allclose(fit.beta[0], np.log(0.3), atol=1e-6)

    def test_agrees_with_ml_on_simple_scenario(self):
        terms = parse_spec(get_scenario("simple").simple_spec)
        checked = 0
        for r in range(50):
            data = simple_sample(r)
            dm = build_design_matrix(data, terms, exposure="A")
            ml = fit_logbin_ml(dm, data.y)
            if not ml.converged or ml.on_boundary:
                continue
            ab = fit_logbin_barrier(dm, data.y)
            np.testing.assert_allclose(ab.beta, ml.beta, atol=1e-4)
            assert abs(ab.loglik - ml.loglik) < 1e-6
            checked += 1
        assert checked >= 45

    def test_boundary_optimum(self):
        # engineered so the unconstrained optimum is infeasible: a complex-
        # scenario sample where the robust Poisson fit has means > 1
        for r in range(20):
            data = generate("complex", 1000, rng=stream(703, r))
            dm = build_design_matrix(
                data, parse_spec(get_scenario("complex").simple_spec), exposure="A"
            )
            rp = fit_robust_poisson(dm, data.y)
            if rp.n_mu_gt1 == 0:
                continue
            ab = fit_logbin_barrier(dm, data.y)
            assert ab.on_boundary
            assert np.all(np.exp(dm.X @ ab.beta) <= 1.0 + 1e-10)
            return
        pytest.fail("no sample with infeasible unconstrained optimum found")

    def test_strict_feasibility(self):
        for r in range(5):
            data = generate("moderate", 800, rng=stream(704, r))
            dm = build_design_matrix(
                data, parse_spec(get_scenario("moderate").simple_spec), exposure="A"
            )
            ab = fit_logbin_barrier(dm, data.y)
            assert np.max(dm.X @ ab.beta) <= 1e-10
