import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from studentlevy.cqmle import (
    cauchy_loglik,
    cauchy_score_hessian,
    fit_cqmle,
    fit_cqmle_multistart,
)
from studentlevy.errors import DomainError, IdentifiabilityError, NonConvergence
from studentlevy.inference import covariate_gram, gamma_a
from studentlevy.model import PathSample, SamplingDesign, Theta
from studentlevy.simulate import RegressorSpec, simulate_regression_path

THETA = Theta((5.0, -1.0), 3.0, 1.0)


def scaled(path, c):
    return PathSample(path.design, path.times, c * path.covariates, c * path.responses)


@pytest.fixture(scope="module")
def path():
    return simulate_regression_path(THETA, SamplingDesign(100, 20, 10), RegressorSpec(), 101)


def central_gradient(f, z, e):
    return np.array([(f(z + e * v) - f(z - e * v)) / (2 * e) for v in np.eye(z.size)])


class TestLoglik:
    def test_zero_residuals(self):
        d = SamplingDesign(10, 1, 1)
        p = simulate_regression_path(Theta((5.0, -1.0), 0.0, 1.0), d, RegressorSpec(), 0)
        val = cauchy_loglik(((5.0, -1.0), 2.0), p, d)
        assert val == pytest.approx(d.N * (-math.log(0.1 * 2.0) - math.log(math.pi)), rel=1e-14)
        g, _ = cauchy_score_hessian(((5.0, -1.0), 2.0), p, d)
        np.testing.assert_allclose(g[:2], 0.0, atol=1e-12)
        assert g[2] == pytest.approx(-d.N / 2.0, rel=1e-14)

    def test_exact_likelihood_at_cauchy(self, path):
        d = path.design
        dy, dx = path.increments(d.N)
        ref = stats.cauchy.logpdf(dy - dx @ THETA.mu_array, scale=d.h * THETA.sigma).sum()
        assert cauchy_loglik((THETA.mu, THETA.sigma), path, d) == pytest.approx(ref, rel=1e-12)

    @given(st.floats(0.1, 10.0), st.floats(-3, 3), st.floats(0.5, 5.0))
    @settings(max_examples=25, deadline=None)
    def test_scale_identity(self, c, m, s):
        p = simulate_regression_path(THETA, SamplingDesign(20, 2, 2), RegressorSpec(), 5)
        d = p.design
        lhs = cauchy_loglik(((m, 1.0), s), scaled(p, c), d)
        rhs = cauchy_loglik(((m, 1.0), s / c), p, d) - d.N * math.log(c)
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-9)

    def test_reads_only_stage_one_window(self, path):
        d = path.design
        cut = PathSample(d, path.times[: d.N + 1], path.covariates[: d.N + 1], path.responses[: d.N + 1])
        a = ((4.0, -2.0), 2.5)
        assert cauchy_loglik(a, path, d) == cauchy_loglik(a, cut, d)

    @pytest.mark.parametrize("sigma", [0.0, -1.0, math.nan])
    def test_sigma_domain(self, path, sigma):
        with pytest.raises(DomainError):
            cauchy_loglik(((5.0, -1.0), sigma), path, path.design)


class TestDerivatives:
    @pytest.mark.parametrize("seed", range(5))
    def test_against_finite_differences(self, path, seed):
        rng = np.random.default_rng(seed)
        z = np.array([5.0, -1.0, 3.0]) + rng.normal(0, [1.0, 1.0, 0.5])
        z[2] = abs(z[2]) + 0.2
        d = path.design
        f = lambda v: cauchy_loglik((v[:2], v[2]), path, d)
        g, H = cauchy_score_hessian((z[:2], z[2]), path, d)
        gfd = central_gradient(f, z, 1e-5)
        Hfd = np.array([central_gradient(lambda v: cauchy_score_hessian((v[:2], v[2]), path, d)[0][i], z, 1e-5)
                        for i in range(3)])
        np.testing.assert_allclose(g, gfd, rtol=1e-6, atol=1e-6 * np.abs(g).max())
        np.testing.assert_allclose(H, Hfd, rtol=1e-6, atol=1e-6 * np.abs(H).max())

    def test_hessian_symmetric(self, path):
        _, H = cauchy_score_hessian(((4.3, -0.2), 2.2), path, path.design)
        assert np.max(np.abs(H - H.T)) == 0.0


class TestFit:
    def test_converged_fit_properties(self, path):
        fit = fit_cqmle(path, path.design)
        assert fit.converged and fit.gradient_norm <= 1e-8
        assert np.linalg.eigvalsh(fit.hessian)[0] >= 0.0
        assert fit.N == path.design.N

    def test_full_design_within_four_standard_errors(self):
        d = SamplingDesign(200, 400, 20)
        p = simulate_regression_path(THETA, d, RegressorSpec(), 20240601)
        fit = fit_cqmle(p, d)
        se = np.sqrt(np.diag(np.linalg.inv(gamma_a(covariate_gram(p, d), fit.sigma_hat))) / d.N)
        est = np.append(fit.mu_hat, fit.sigma_hat)
        assert np.all(np.abs(est - [5.0, -1.0, 3.0]) <= 4 * se)

    @pytest.mark.parametrize("c", [0.01, 0.5, 7.0, 1e3])
    def test_argmax_equivariance(self, path, c):
        a = fit_cqmle(path, path.design)
        b = fit_cqmle(scaled(path, c), path.design)
        np.testing.assert_allclose(b.mu_hat, a.mu_hat, rtol=1e-6, atol=1e-9)
        assert b.sigma_hat == pytest.approx(c * a.sigma_hat, rel=1e-6)

    def test_thinning_contract(self):
        long = simulate_regression_path(THETA, SamplingDesign(100, 30, 5), RegressorSpec(), 8)
        d = long.design
        n1 = d.N + 1
        cut = PathSample(SamplingDesign(100, 5, 5), long.times[:n1], long.covariates[:n1], long.responses[:n1])
        a = fit_cqmle(long, d)
        b = fit_cqmle(cut, cut.design)
        np.testing.assert_array_equal(a.mu_hat, b.mu_hat)
        assert a.sigma_hat == b.sigma_hat

    def test_multistart_agreement(self, path):
        d = path.design
        a = fit_cqmle(path, d, init=(THETA.mu, THETA.sigma))
        b = fit_cqmle(path, d, init=((4.0, 0.0), 1.0))
        np.testing.assert_allclose(np.append(a.mu_hat, a.sigma_hat), np.append(b.mu_hat, b.sigma_hat), rtol=1e-6)
        best = fit_cqmle_multistart(path, d, [(THETA.mu, THETA.sigma), ((4.0, 0.0), 1.0)])
        assert "multistart_disagreement" not in best.flags

    def test_box_boundary_is_flagged(self, path):
        fit = fit_cqmle(path, path.design, bounds=(None, (0.1, 1.0)))
        assert not fit.converged and "boundary" in fit.flags
        assert fit.sigma_hat == pytest.approx(1.0)

    def test_strict_mode_raises(self, path):
        with pytest.raises(NonConvergence):
            fit_cqmle(path, path.design, init=((0.0, 0.0), 0.1), max_iter=0, strict=True)
        loose = fit_cqmle(path, path.design, init=((0.0, 0.0), 0.1), max_iter=0)
        assert not loose.converged and "max_iter" in loose.flags

    def test_too_few_increments(self):
        p = simulate_regression_path(THETA, SamplingDesign(3, 1, 1), RegressorSpec(), 0)
        with pytest.raises(DomainError, match="N >= q \\+ 2"):
            fit_cqmle(p, p.design)

    def test_zero_covariates(self, path):
        flat = PathSample(path.design, path.times, np.zeros_like(path.covariates), path.responses)
        with pytest.raises(IdentifiabilityError):
            fit_cqmle(flat, path.design)

    def test_collinear_covariates(self, path):
        x = path.covariates[:, :1]
        col = PathSample(path.design, path.times, np.hstack([x, 2 * x]), path.responses)
        with pytest.raises(IdentifiabilityError):
            fit_cqmle(col, path.design)
