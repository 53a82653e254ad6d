import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, special, stats

from studentlevy.errors import DomainError
from studentlevy.model import SamplingDesign, Theta
from studentlevy.simulate import RegressorSpec, simulate_levy_increments, simulate_regression_path
from studentlevy.tqmle import (
    ResidualSet,
    fit_tqmle,
    score_gap,
    student_loglik,
    student_score,
    unit_residuals,
)

THETA = Theta((5.0, -1.0), 3.0, 1.0)
residual_arrays = st.lists(st.floats(-50, 50), min_size=2, max_size=40).map(np.array)


def second_difference(f, x, step):
    """Central second difference with one Richardson step, error O(step^4)."""
    d = lambda s: (f(x + s) - 2 * f(x) + f(x - s)) / (s * s)
    return (4 * d(step / 2) - d(step)) / 3


@pytest.fixture(scope="module")
def path():
    return simulate_regression_path(THETA, SamplingDesign(50, 30, 5), RegressorSpec(), 3)


class TestResiduals:
    def test_true_parameters_recover_levy_increments(self, path, table):
        eps = unit_residuals(path, THETA.mu, THETA.sigma)
        j = simulate_levy_increments(table(1.0, 0.02), path.design, 3)
        np.testing.assert_allclose(eps.values, np.diff(j[::50]), atol=1e-10)
        assert eps.count == 30

    def test_length_is_floor_T(self):
        p = simulate_regression_path(THETA, SamplingDesign(20, 7.5, 1), RegressorSpec(), 1)
        assert unit_residuals(p, THETA.mu, 1.0).count == 7

    def test_linear_in_mu(self, path):
        delta = np.array([0.3, -0.7])
        a = unit_residuals(path, THETA.mu, 2.0).values
        b = unit_residuals(path, THETA.mu_array + delta, 2.0).values
        dx = np.diff(path.covariates[::50], axis=0)
        np.testing.assert_allclose(b - a, -(dx @ delta) / 2.0, atol=1e-12)

    def test_domain(self, path):
        with pytest.raises(DomainError):
            unit_residuals(path, THETA.mu, 0.0)
        with pytest.raises(DomainError):
            ResidualSet([])


class TestLoglik:
    def test_single_zero_residual_at_one(self):
        assert student_loglik(1.0, [0.0]) == pytest.approx(-math.log(math.pi), rel=1e-14)

    @given(st.floats(-1e3, 1e3))
    def test_cauchy_collapse(self, e):
        assert student_loglik(1.0, [e]) == pytest.approx(-math.log(math.pi) - math.log1p(e * e), rel=1e-12, abs=1e-12)

    @given(residual_arrays, st.floats(0.1, 30.0))
    @settings(max_examples=40)
    def test_matches_scipy_density(self, e, nu):
        ref = np.sum(stats.t.logpdf(e * math.sqrt(nu), nu) + 0.5 * math.log(nu))
        assert student_loglik(nu, e) == pytest.approx(ref, rel=1e-10, abs=1e-9)

    @pytest.mark.parametrize("nu", [0.5, 1.0, 2.0, 5.0])
    def test_curvature_is_data_free(self, nu):
        e = np.random.default_rng(int(nu * 10)).standard_cauchy(57)
        fd = second_difference(lambda v: student_loglik(v, e), nu, 0.02 * nu)
        exact = -(e.size / 4) * (special.polygamma(1, nu / 2) - special.polygamma(1, (nu + 1) / 2))
        assert fd == pytest.approx(exact, rel=1e-6)

    @given(residual_arrays)
    @settings(max_examples=30)
    def test_concave_on_grid(self, e):
        grid = np.geomspace(0.05, 100, 60)
        vals = np.array([student_loglik(v, e) for v in grid])
        # concavity in nu on a nonuniform grid: slopes decrease
        slopes = np.diff(vals) / np.diff(grid)
        assert np.all(np.diff(slopes) <= 1e-9 * (1 + np.abs(slopes[1:])))

    def test_score_is_derivative(self):
        e = np.array([0.3, -2.0, 5.0, 0.01])
        nu = 2.7
        fd = (student_loglik(nu + 1e-6, e) - student_loglik(nu - 1e-6, e)) / 2e-6
        assert student_score(nu, e) == pytest.approx(fd, rel=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            student_loglik(0.0, [1.0])


class TestFit:
    def test_digamma_identity(self):
        # log(1 + 3) = 2 log 2, and psi(1) - psi(1/2) = 2 log 2
        fit = fit_tqmle(np.array([math.sqrt(3.0), -math.sqrt(3.0)] * 5))
        assert fit.mbar == pytest.approx(2 * math.log(2), rel=1e-15)
        assert fit.nu_hat == pytest.approx(1.0, abs=1e-8)
        assert fit.converged and fit.boundary_flag == "none" and abs(fit.score) <= 1e-10

    @given(residual_arrays)
    @settings(max_examples=50)
    def test_root_against_brentq(self, e):
        fit = fit_tqmle(e)
        m = np.mean(np.log1p(e * e))
        if fit.boundary_flag == "none":
            ref = optimize.brentq(lambda v: score_gap(v) - m, 0.05, 100, xtol=1e-14, rtol=1e-14)
            assert fit.nu_hat == pytest.approx(ref, rel=1e-9)
            assert abs(fit.score) <= 1e-10
        elif fit.boundary_flag == "lower":
            assert m >= score_gap(0.05) and fit.nu_hat == 0.05
        else:
            assert m <= score_gap(100.0) and fit.nu_hat == 100.0

    def test_monotone_in_mbar(self):
        a = fit_tqmle([1.0, 2.0, -1.5])
        b = fit_tqmle([1.5, 2.5, -2.0])
        assert b.mbar > a.mbar and b.nu_hat < a.nu_hat

    def test_degenerate_residuals_pin_upper_bound(self):
        fit = fit_tqmle(np.zeros(10), bounds=(0.1, 50.0))
        assert fit.nu_hat == 50.0 and fit.boundary_flag == "upper"

    def test_lower_bound(self):
        fit = fit_tqmle(np.full(5, 1e6), bounds=(0.5, 50.0))
        assert fit.nu_hat == 0.5 and fit.boundary_flag == "lower"

    @pytest.mark.parametrize("bounds", [(0.0, 10.0), (5.0, 1.0), (1.0, math.inf)])
    def test_bad_bounds(self, bounds):
        with pytest.raises(DomainError):
            fit_tqmle([1.0, 2.0], bounds)

    def test_exact_t_residuals_are_consistent(self):
        nu = 3.0
        e = np.random.default_rng(4).standard_t(nu, 20000) / math.sqrt(nu)
        fit = fit_tqmle(e)
        # sd of the estimator is 1 / sqrt(T * Fisher), about 0.036 here
        assert fit.nu_hat == pytest.approx(nu, abs=0.15)

    def test_perturbation_stability(self):
        d = SamplingDesign(100, 400, 20)
        p = simulate_regression_path(THETA, d, RegressorSpec(), 44)
        base = fit_tqmle(unit_residuals(p, THETA.mu, THETA.sigma)).nu_hat
        shift = 1.0 / math.sqrt(d.N)
        moved = fit_tqmle(unit_residuals(p, THETA.mu_array + shift, THETA.sigma * (1 + shift))).nu_hat
        assert abs(moved - base) <= 5 * math.sqrt(d.T / d.N)
