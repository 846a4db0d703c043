"""Tests for the exponent tables, slope fitting, and verdict machinery."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oldroyd.decay import power_gauss
from oldroyd.rates import (
    TimeSeries,
    alignment_report,
    alpha,
    ball_energy,
    fit_loglog_slope,
    predicted_exponents,
    two_sided_check,
)
from oldroyd.spectral import FourierGrid, SpectralVectorField, sobolev_seminorm

from conftest import random_vector_field


def power_series(exponent, columns=("tau_l2sq",), t_lo=1.0, t_hi=100.0, n=40, c=2.0):
    t = np.geomspace(t_lo, t_hi, n)
    vals = c * (1.0 + t) ** exponent
    return TimeSeries(t, {name: vals for name in columns})


class TestTimeSeries:
    def test_rejects_decreasing_times(self):
        with pytest.raises(ValueError):
            TimeSeries(np.array([1.0, 0.5]), {"u_l2sq": np.array([1.0, 1.0])})

    def test_rejects_negative_norms(self):
        with pytest.raises(ValueError):
            TimeSeries(np.array([1.0, 2.0]), {"u_l2sq": np.array([1.0, -1.0])})

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            TimeSeries(np.array([1.0, 2.0]), {"u_l2sq": np.array([1.0])})

    def test_missing_column(self):
        series = power_series(-1.0)
        with pytest.raises(KeyError):
            series.column("nope")


class TestAlpha:
    def test_flat_characters(self):
        assert alpha(0.0, 0.0) == 1.5

    def test_lp_four_thirds(self):
        # r* = -3/4 on both matches the L^{4/3} rate 3/2 (2/p - 1) = 3/4
        assert alpha(-0.75, -0.75) == pytest.approx(0.75)

    def test_cap(self):
        assert alpha(2.0, 2.0) == 1.5

    def test_none_means_absent(self):
        assert alpha(0.0, None) == 1.5
        assert alpha(None, 0.0) == 1.5  # branch 1 + r_tau = 1 capped

    def test_rejects_low_characters(self):
        with pytest.raises(ValueError):
            alpha(-1.5, 0.0)
        with pytest.raises(ValueError):
            alpha(0.0, -2.0)

    @settings(max_examples=60, deadline=None)
    @given(
        r_u=st.floats(-1.49, 4.0),
        r_tau=st.floats(-1.49, 4.0),
        bump=st.floats(0.0, 1.0),
    )
    def test_monotone_and_capped(self, r_u, r_tau, bump):
        base = alpha(r_u, r_tau)
        assert 0.0 < base <= 1.5
        assert alpha(r_u + bump, r_tau) >= base
        assert alpha(r_u, r_tau + bump) >= base


class TestPredictedExponents:
    def test_flat_case_table(self):
        pred = predicted_exponents(0.0, 0.0)
        e = pred.exponents
        assert e["z_l2sq"] == -1.5
        assert e["u_h1sq"] == -2.5
        assert e["tau_l2sq"] == -2.5
        assert e["eps_l2sq"] == -3.5
        assert pred.case == "a"
        assert pred.two_sided_exponent == -2.5
        assert pred.epsilon_bound_exponent == -3.5

    def test_case_b(self):
        pred = predicted_exponents(0.5, -1.2)
        assert pred.case == "b"
        assert pred.two_sided_exponent == pytest.approx(-(3.5 - 1.2))
        assert pred.epsilon_bound_exponent == pytest.approx(-(4.5 - 1.2))

    def test_case_b_near_boundary(self):
        pred = predicted_exponents(0.0, -1.4)
        assert pred.case == "b"
        assert pred.two_sided_exponent == pytest.approx(-(2.5 - 0.4))

    def test_cap_regime_no_lower_bounds(self):
        pred = predicted_exponents(1.0, 1.0)
        assert pred.case is None
        assert pred.two_sided_exponent is None

    def test_velocity_only_case_a(self):
        pred = predicted_exponents(0.0, None)
        assert pred.case == "a"
        assert pred.two_sided_exponent == -2.5

    @settings(max_examples=40, deadline=None)
    @given(r_u=st.floats(-1.45, 3.0), r_tau=st.floats(-1.45, 3.0))
    def test_table_ordering(self, r_u, r_tau):
        e = predicted_exponents(r_u, r_tau).exponents
        assert e["eps_l2sq"] == e["tau_l2sq"] - 1.0
        assert e["eps_l2sq"] == e["u_h1sq"] - 1.0
        assert e["u_h1sq"] == e["u_l2sq"] - 1.0
        assert e["u_h2sq"] == e["u_l2sq"] - 2.0


class TestSlopeFit:
    def test_exact_power_law(self):
        fit = fit_loglog_slope(power_series(-2.5), "tau_l2sq", (1.0, 100.0))
        assert fit.slope == pytest.approx(-2.5, abs=1e-10)
        assert fit.stderr < 1e-10

    def test_modulated_power_law(self):
        t = np.geomspace(1.0, 1000.0, 80)
        vals = (1.0 + t) ** (-2.5) * (1.0 + 0.1 * np.sin(np.log1p(t)))
        series = TimeSeries(t, {"tau_l2sq": vals})
        fit = fit_loglog_slope(series, "tau_l2sq", (1.0, 1000.0))
        assert fit.slope == pytest.approx(-2.5, abs=0.1)
        assert fit.stderr > 0

    def test_constant_column(self):
        fit = fit_loglog_slope(power_series(0.0), "tau_l2sq", (1.0, 100.0))
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_too_few_samples(self):
        series = power_series(-1.0, n=6)
        with pytest.raises(ValueError):
            fit_loglog_slope(series, "tau_l2sq", (1.0, 1.5))

    def test_nonpositive_values(self):
        t = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        series = TimeSeries(t, {"align_cos": np.array([1.0, 0.5, 0.0, 0.5, 1.0])})
        with pytest.raises(ValueError):
            fit_loglog_slope(series, "align_cos", (1.0, 5.0))


class TestAlignmentReport:
    def make_series(self, ratio_exponent=-1.0, cos_path=None):
        t = np.geomspace(1.0, 100.0, 30)
        tau = 3.0 * (1.0 + t) ** (-2.5)
        eps = tau * (1.0 + t) ** ratio_exponent
        cos = cos_path if cos_path is not None else 1.0 - 0.3 * (1.0 + t) ** (-1.0)
        return TimeSeries(t, {"tau_l2sq": tau, "eps_l2sq": eps,
                              "align_cos": np.broadcast_to(cos, t.shape)})

    def test_exact_alignment_trivial_pass(self):
        t = np.geomspace(1.0, 100.0, 30)
        series = TimeSeries(t, {
            "tau_l2sq": (1.0 + t) ** (-2.5),
            "eps_l2sq": np.zeros_like(t),
            "align_cos": np.ones_like(t),
        })
        report = alignment_report(series, (1.0, 100.0))
        assert report.trivial and report.aligned

    def test_decaying_ratio_passes(self):
        report = alignment_report(self.make_series(), (1.0, 100.0))
        assert not report.trivial
        assert report.ratio_slope == pytest.approx(-1.0, abs=1e-9)
        assert report.aligned

    def test_flat_ratio_fails(self):
        report = alignment_report(self.make_series(ratio_exponent=0.0), (1.0, 100.0))
        assert not report.aligned

    def test_degenerate_cosine_fails(self):
        report = alignment_report(
            self.make_series(cos_path=np.zeros(30)), (1.0, 100.0))
        assert not report.aligned

    def test_zero_stress_rejected(self):
        t = np.geomspace(1.0, 10.0, 10)
        series = TimeSeries(t, {"tau_l2sq": np.zeros_like(t),
                                "eps_l2sq": np.zeros_like(t),
                                "align_cos": np.zeros_like(t)})
        with pytest.raises(ValueError):
            alignment_report(series, (1.0, 10.0))


class TestBallEnergy:
    def test_full_norm_recovered(self):
        grid = FourierGrid(n_per_axis=16, box_scale=2.0)
        u = random_vector_field(grid, seed=1)
        full = ball_energy(u, radius=1e6)
        assert full == pytest.approx(sobolev_seminorm(u, 0), rel=1e-12)

    def test_only_mean_mode_below_first_shell(self):
        grid = FourierGrid(n_per_axis=16, box_scale=2.0)
        c = np.zeros(grid.shape(3), dtype=np.complex128)
        c[0, 0, 0, 0] = 2.0
        c[1, 1, 0, 0] = 1.0
        c[1, -1, 0, 0] = 1.0
        u = SpectralVectorField(grid, c)
        below = ball_energy(u, radius=0.25 / grid.box_scale)
        assert below == pytest.approx(grid.volume * 4.0, rel=1e-12)

    def test_heat_ball_tracking(self):
        # shrinking-ball energy of a heat-evolved profile tracks the full
        # decay rate when the radius scales like (1+t)^(-1/2)
        prof = power_gauss(0.0)
        times = np.geomspace(10.0, 1e4, 12)
        vals = []
        for t in times:
            radius = (1.0 + t) ** -0.5
            vals.append(ball_energy_profile_heat(prof, radius, t))
        series = TimeSeries(times, {"ball": np.array(vals)})
        fit = fit_loglog_slope(series, "ball", (10.0, 1e4))
        assert fit.slope == pytest.approx(-1.5, abs=0.15)

    def test_rejects_bad_radius(self):
        grid = FourierGrid(n_per_axis=8, box_scale=1.0)
        u = random_vector_field(grid, seed=2)
        with pytest.raises(ValueError):
            ball_energy(u, 0.0)


def ball_energy_profile_heat(profile, radius, t):
    return ball_energy_profile_weighted(profile, radius, lambda r: np.exp(-2.0 * r**2 * t))


def ball_energy_profile_weighted(profile, radius, weight):
    from oldroyd.decay import profile_ball_energy

    return profile_ball_energy(profile, radius, weight)


class TestTwoSidedCheck:
    def test_synthetic_exact_rate_passes(self):
        pred = predicted_exponents(0.0, 0.0)
        series = power_series(-2.5, columns=("u_h1sq", "tau_l2sq"))
        verdict = two_sided_check(series, pred, (1.0, 100.0), tol=0.01)
        assert verdict.applicable and verdict.passed
        assert verdict.verdicts == {"u_h1sq": "pass", "tau_l2sq": "pass"}

    def test_case_b_exponent(self):
        pred = predicted_exponents(0.5, -1.2)
        series = power_series(-2.3, columns=("u_h1sq", "tau_l2sq"))
        verdict = two_sided_check(series, pred, (1.0, 100.0), tol=0.05)
        assert verdict.exponent == pytest.approx(-2.3)
        assert verdict.passed

    def test_wrong_rate_fails(self):
        pred = predicted_exponents(0.0, 0.0)
        series = power_series(-1.0, columns=("u_h1sq", "tau_l2sq"))
        verdict = two_sided_check(series, pred, (1.0, 100.0), tol=0.1)
        assert verdict.applicable and not verdict.passed

    def test_not_applicable_never_passes_silently(self):
        pred = predicted_exponents(1.0, 1.0)
        series = power_series(-2.5, columns=("u_h1sq", "tau_l2sq"))
        verdict = two_sided_check(series, pred, (1.0, 100.0), tol=10.0)
        assert not verdict.applicable
        assert not verdict.passed
        assert verdict.verdicts == {}
