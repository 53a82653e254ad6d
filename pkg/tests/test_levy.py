import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from studentlevy import levy
from studentlevy.errors import DomainError, MassError, TruncationError
from studentlevy.levy import GridSpec, build_density_table, cdf_eval, default_grid, quantile


def unit_student_pdf(x, nu):
    # density proportional to (1 + x^2)^(-(nu+1)/2) is a standard t_nu scaled by 1/sqrt(nu)
    return stats.t.pdf(x * math.sqrt(nu), nu) * math.sqrt(nu)


def cauchy(x):
    return 1.0 / (math.pi * (1.0 + x * x))


class TestCharacteristicFunction:
    def test_origin(self):
        for nu in (0.3, 1.0, 4.0):
            assert levy.cf_unit(0.0, nu) == 1.0
            assert levy.log_cf_rescaled(0.0, nu, 0.01) == 0.0

    def test_cauchy_case(self):
        u = np.linspace(-30, 30, 121)
        np.testing.assert_allclose(levy.cf_unit(u, 1.0), np.exp(-np.abs(u)), rtol=1e-13)
        for h in (1.0, 0.1, 1e-3):
            np.testing.assert_allclose(levy.log_cf_rescaled(u, 1.0, h), -np.abs(u), rtol=1e-11, atol=1e-13)

    def test_nu_two_at_one(self):
        ref = float(mpmath.besselk(1, 1))
        assert ref == pytest.approx(0.6019072302, abs=1e-10)
        assert levy.cf_unit(1.0, 2.0) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("nu", [0.5, 2.0, 3.0, 7.5])
    def test_matches_numerical_fourier_transform(self, nu):
        # E cos(uX) for the unit-time law by Fourier-weighted quadrature of its density
        for u in (0.3, 1.0, 2.5):
            ref, _ = integrate.quad(unit_student_pdf, 0.0, np.inf, args=(nu,), weight="cos", wvar=u)
            assert levy.cf_unit(u, nu) == pytest.approx(2 * ref, rel=1e-7)

    def test_small_step_limit_is_cauchy(self):
        val = levy.log_cf_rescaled(1.0, 2.0, 1e-4)
        assert abs(val + 1.0) < 1e-3

    def test_no_underflow_far_out(self):
        # |u|/h = 1e8
        for nu in (0.5, 3.0, 30.0):
            v = levy.log_cf_rescaled(1e6, nu, 1e-2)
            assert math.isfinite(v) and v < -1e5

    @given(st.floats(-1e3, 1e3), st.floats(0.05, 40.0), st.floats(1e-3, 1.0))
    def test_bounded_by_one(self, u, nu, h):
        assert levy.log_cf_rescaled(u, nu, h) <= 0.0

    def test_domain(self):
        with pytest.raises(DomainError):
            levy.cf_unit(1.0, 0.0)
        with pytest.raises(DomainError):
            levy.log_cf_rescaled(1.0, 1.0, 1.5)


class TestGridSpec:
    def test_spacing(self):
        g = GridSpec(x_max=10.0, points=401)
        assert g.x_min == -10.0
        assert g.dx == pytest.approx(0.05)
        np.testing.assert_allclose(np.diff(g.abscissae()), 0.05, rtol=1e-9)

    @pytest.mark.parametrize("kw", [{"points": 32}, {"x_max": -1.0}, {"u_points": 100}, {"u_max": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            GridSpec(**kw)

    def test_default_grid_reaches_power_tail(self):
        g = default_grid(2.0, 0.01)
        assert g.x_max >= 5000.0 and g.points % 2 == 1
        assert g.dx == pytest.approx(0.025)


class TestDensityTable:
    def test_cauchy_on_small_symmetric_grid(self):
        t = build_density_table(1.0, 1 / 200, GridSpec(50.0, 8192))
        assert np.max(np.abs(t.pdf - 1 / (np.pi * (1 + t.x**2)))) <= 1e-6

    @pytest.mark.parametrize("nu", [0.5, 1.0, 2.0, 3.0, 5.0])
    def test_unit_time_is_student(self, nu):
        t = build_density_table(nu, 1.0)
        assert np.max(np.abs(t.pdf - unit_student_pdf(t.x, nu))) <= 1e-6
        # tail beyond the grid is the exact Student tail
        exact_tail = 2 * stats.t.sf(t.grid.x_max * math.sqrt(nu), nu)
        assert t.tail_mass == pytest.approx(exact_tail, rel=1e-6, abs=1e-12)

    def test_cauchy_tail_mass(self):
        t = build_density_table(1.0, 0.05)
        assert t.tail_mass == pytest.approx(1 - 2 / math.pi * math.atan(t.grid.x_max), rel=1e-6)

    @pytest.mark.parametrize("nu", [0.5, 1.0, 2.0, 3.0, 5.0])
    @pytest.mark.parametrize("h", [1.0, 0.1, 0.01, 1 / 200])
    def test_lattice_invariants(self, table, nu, h):
        t = table(nu, h)
        assert abs(t.mass + t.tail_mass - 1.0) <= 1e-4
        assert np.all(t.pdf >= 0.0)
        assert np.max(np.abs(t.pdf - t.pdf[::-1])) <= 1e-8
        assert np.all(np.diff(t.cdf) >= 0.0)
        assert t.cdf[0] >= 0.0 and t.cdf[-1] <= 1.0
        # the cdf leaves exactly the computed tail mass outside the grid
        assert t.cdf[-1] - t.cdf[0] == pytest.approx(1.0 - t.tail_mass, abs=1e-4)
        assert t.clipped_mass <= 1e-6

    def test_immutable(self, table):
        t = table(1.0, 0.1)
        with pytest.raises(ValueError):
            t.pdf[0] = 1.0

    def test_truncation_error(self):
        with pytest.raises(TruncationError):
            build_density_table(2.0, 0.01, GridSpec(50.0, 8192, u_max=5.0))

    def test_mass_error(self):
        with pytest.raises(MassError):
            build_density_table(2.0, 0.1, GridSpec(50.0, 4096), mass_tolerance=1e-14)

    @pytest.mark.parametrize("nu", [1.2330468215444876, 1.9863152449495776, 2.5067255910234847])
    @pytest.mark.parametrize("h", [1 / 50, 1 / 100])
    def test_tail_mass_matches_power_law(self, nu, h):
        # far out f_h(x) ~ c h^(1-nu) |x|^(-1-nu) with c the unit-density tail constant
        t = build_density_table(nu, h)
        c = math.exp(math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2)) / math.sqrt(math.pi)
        asymptote = 2 * c * h ** (1 - nu) * t.grid.x_max ** (-nu) / nu
        assert t.tail_mass == pytest.approx(asymptote, rel=0.02)
        assert abs(t.mass + t.tail_mass - 1.0) <= 1e-6

    @settings(max_examples=8, deadline=None)
    @given(st.floats(0.5, 6.0), st.floats(0.01, 1.0))
    def test_mass_for_random_parameters(self, nu, h):
        t = build_density_table(nu, h)
        assert abs(t.mass + t.tail_mass - 1.0) <= 1e-4
        assert np.all(np.diff(t.cdf) >= 0.0)


class TestCdfAndQuantile:
    def test_cdf_anchor_and_cauchy(self, table):
        t = table(1.0, 0.01)
        assert cdf_eval(t, 0.0) == pytest.approx(0.5, abs=1e-6)
        assert cdf_eval(t, 1.0) == pytest.approx(0.75, abs=1e-4)
        x = np.linspace(-50, 50, 1001)
        np.testing.assert_allclose(cdf_eval(t, x), 0.5 + np.arctan(x) / np.pi, atol=1e-4)
        assert cdf_eval(t, t.grid.x_max + 1) == 1.0
        assert cdf_eval(t, -t.grid.x_max - 1) == 0.0

    def test_quantiles(self, table):
        t = table(1.0, 0.01)
        assert abs(quantile(t, 0.5)) <= t.dx
        assert quantile(t, 0.75) == pytest.approx(1.0, abs=1e-3)
        p = np.linspace(0.01, 0.99, 99)
        np.testing.assert_allclose(cdf_eval(t, quantile(t, p)), p, atol=1e-8)
        np.testing.assert_allclose(quantile(t, p), np.tan(np.pi * (p - 0.5)), atol=1e-3)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2, math.nan])
    def test_quantile_domain(self, table, p):
        with pytest.raises(DomainError):
            quantile(table(1.0, 0.01), p)

    def test_round_trip_for_heavier_law(self, table):
        t = table(0.5, 0.1)
        p = np.linspace(0.01, 0.99, 99)
        np.testing.assert_allclose(cdf_eval(t, quantile(t, p)), p, atol=1e-8)


class TestSampling:
    def test_deterministic(self, table):
        t = table(2.0, 0.01)
        a = levy.sample_increments(t, 1000, 42)
        b = levy.sample_increments(t, 1000, 42)
        np.testing.assert_array_equal(a, b)

    def test_prefix_property(self, table):
        t = table(2.0, 0.01)
        a = levy.sample_increments(t, 500, 7)
        b = levy.sample_increments(t, 2000, 7)
        np.testing.assert_array_equal(a, b[:500])

    def test_cauchy_ks_and_median(self, table):
        t = table(1.0, 0.005)
        x = levy.sample_increments(t, 10_000, 20240601)
        D = stats.kstest(x, "cauchy").statistic
        assert D < 1.63 / math.sqrt(10_000)
        y = levy.sample_increments(t, 10_001, 99)
        assert abs(np.median(y)) <= 0.05

    def test_ks_against_table(self, table):
        t = table(3.0, 0.01)
        x = levy.sample_increments(t, 10_000, 5)
        D = stats.kstest(x, lambda v: cdf_eval(t, v)).statistic
        assert D < 1.63 / math.sqrt(10_000)

    def test_pareto_tail_carries_outer_mass(self):
        # a deliberately narrow grid: 1.27% of the Cauchy law lies beyond |x| = 50
        t = build_density_table(1.0, 1.0, GridSpec(50.0, 8001))
        m = 400_000
        x = levy.sample_increments(t, m, 3)
        frac = np.mean(np.abs(x) > 50.0)
        exact = 1 - 2 / math.pi * math.atan(50.0)
        assert abs(frac - exact) < 4 * math.sqrt(exact / m)
        # beyond the grid the splice follows the Cauchy tail P(|X| > x) ~ 2/(pi x)
        far = np.mean(np.abs(x) > 500.0)
        assert abs(far - 2 / (500 * math.pi)) < 4 * math.sqrt(far / m) + 2e-5
        clamped = levy.sample_increments(t, m, 3, tails="clamp")
        assert np.max(np.abs(clamped)) <= 50.0

    def test_bad_arguments(self, table):
        t = table(1.0, 0.01)
        with pytest.raises(DomainError):
            levy.sample_increments(t, 0, 1)
        with pytest.raises(DomainError):
            levy.sample_increments(t, 10, 1, tails="reflect")


class TestL1Distance:
    def test_zero_at_cauchy(self, table):
        for h in (1.0, 0.01):
            assert levy.l1_distance_to_cauchy(table(1.0, h)) <= 1e-6

    def test_positive_for_student_two(self, table):
        assert levy.l1_distance_to_cauchy(table(2.0, 1.0)) > 0.05

    def test_decreases_with_step(self, table):
        vals = [levy.l1_distance_to_cauchy(table(2.0, h)) for h in (1 / 50, 1 / 100, 1 / 200)]
        assert vals[0] > vals[1] > vals[2] > 0.0
