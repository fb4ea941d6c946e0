import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nbti_burnin.device_models import (
    HOURS_PER_YEAR,
    DegradationParams,
    DeviceGeometry,
    PowerLawRangeWarning,
    StressCondition,
    aggregate_failure_rate,
    calibrate_prefactor,
    delta_vt_accelerated,
    delta_vt_powerlaw,
    dump_params,
    equivalent_use_time,
    extended_relaxation,
    fit_powerlaw_slope,
    load_params,
    mismatch_sigma,
    quasi_static_ttf,
    system_mttf,
    ttf_scaled,
)
from nbti_burnin.errors import ConfigError, DomainError

P = DegradationParams()


class TestDeltaVtAccelerated:
    def test_zero_time_gives_zero(self):
        assert delta_vt_accelerated(P, StressCondition(4.6, 110.0), 0.0) == 0.0

    def test_voltage_ratio(self):
        t = 168 / HOURS_PER_YEAR
        hi = delta_vt_accelerated(P, StressCondition(4.6, 110.0), t)
        lo = delta_vt_accelerated(P, StressCondition(3.3, 110.0), t)
        assert hi / lo == pytest.approx(2.651167210982607, rel=1e-12)

    def test_closed_form(self):
        c = StressCondition(3.3, 25.0)
        expected = (P.a_prefactor * math.exp(0.75 * 3.3)
                    * math.exp(0.145 / (P.boltzmann_k * 298.0)) * 2.0 ** 0.181)
        assert delta_vt_accelerated(P, c, 2.0) == pytest.approx(expected, rel=1e-13)

    def test_printed_sign_decreases_with_temperature(self):
        cold = delta_vt_accelerated(P, StressCondition(3.3, 25.0), 1.0)
        hot = delta_vt_accelerated(P, StressCondition(3.3, 125.0), 1.0)
        assert hot < cold

    def test_negated_arrhenius_increases_with_temperature(self):
        p = P.replace(negate_arrhenius=True)
        cold = delta_vt_accelerated(p, StressCondition(3.3, 25.0), 1.0)
        hot = delta_vt_accelerated(p, StressCondition(3.3, 125.0), 1.0)
        assert hot > cold

    def test_array_input(self):
        out = delta_vt_accelerated(P, StressCondition(3.3, 110.0), np.array([0.0, 1.0, 2.0]))
        assert out.shape == (3,) and out[0] == 0.0

    @pytest.mark.parametrize("t", [-1.0, float("nan")])
    def test_bad_time(self, t):
        with pytest.raises(DomainError):
            delta_vt_accelerated(P, StressCondition(3.3, 110.0), t)

    def test_unbiased_rejected(self):
        with pytest.raises(DomainError):
            delta_vt_accelerated(P, StressCondition(3.3, 110.0, biased=False), 1.0)

    def test_absolute_zero_rejected(self):
        with pytest.raises(DomainError):
            StressCondition(3.3, -273.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 10.0), st.floats(0.01, 10.0), st.floats(0.0, 5.0), st.floats(0.01, 2.0))
    def test_monotone_in_time_and_voltage(self, t1, dt, v, dv):
        c1, c2 = StressCondition(v, 110.0), StressCondition(v + dv, 110.0)
        assert delta_vt_accelerated(P, c1, t1 + dt) > delta_vt_accelerated(P, c1, t1)
        assert delta_vt_accelerated(P, c2, t1) > delta_vt_accelerated(P, c1, t1)


class TestPowerLaw:
    def test_unit_time(self):
        assert delta_vt_powerlaw(1.0, 0.181, 1.0) == 1.0

    def test_two(self):
        assert delta_vt_powerlaw(1.0, 0.181, 2.0) == pytest.approx(1.1336694127784224, rel=1e-14)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            delta_vt_powerlaw(1.0, 0.181, -0.5)

    def test_loglog_points_on_line_of_slope_n(self):
        t = np.logspace(-2, 3, 12)
        y = delta_vt_powerlaw(3.0, 0.181, t)
        slopes = np.diff(np.log(y)) / np.diff(np.log(t))
        np.testing.assert_allclose(slopes, 0.181, rtol=1e-12)


class TestFit:
    def test_round_trip(self):
        t = np.logspace(-1, 3, 20)
        pts = np.column_stack([t, delta_vt_powerlaw(2.7, 0.181, t)])
        a, n = fit_powerlaw_slope(pts)
        assert n == pytest.approx(0.181, abs=1e-9)
        assert a == pytest.approx(2.7, rel=1e-9)

    def test_exact_line(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PowerLawRangeWarning)
            a, n = fit_powerlaw_slope([(1, 1), (10, 10)])
        assert n == pytest.approx(1.0, abs=1e-12)
        assert a == pytest.approx(1.0, abs=1e-12)

    def test_out_of_range_warns(self):
        with pytest.warns(PowerLawRangeWarning):
            fit_powerlaw_slope([(1, 1), (10, 10)])

    def test_in_range_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fit_powerlaw_slope([(1, 1), (10, 10 ** 0.2)])

    @pytest.mark.parametrize("pts", [[(1, 1)], [(0, 1), (1, 2)], [(1, -1), (2, 2)], [(1, 1), (1, 2)]])
    def test_invalid(self, pts):
        with pytest.raises(DomainError):
            fit_powerlaw_slope(pts)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-3, 1e3), st.floats(0.05, 0.95))
    def test_fit_inverts_powerlaw(self, a, n):
        t = np.logspace(-2, 2, 9)
        got_a, got_n = fit_powerlaw_slope(np.column_stack([t, delta_vt_powerlaw(a, n, t)]),
                                          warn_range=False)
        assert got_n == pytest.approx(n, abs=1e-9)
        assert got_a == pytest.approx(a, rel=1e-9)


class TestTTF:
    def test_reference_temperature_identity(self):
        c = StressCondition(3.3, 125.0)
        expected = P.mttf * math.exp(-P.gamma * 3.3 * 10 / P.t_ox)
        assert ttf_scaled(P, c, P.fc) == pytest.approx(expected, rel=1e-13)

    def test_all_factors_collapse(self):
        p = P.replace(gamma=1e-300)  # effectively zero; gamma must stay positive
        assert ttf_scaled(p, StressCondition(3.3, 125.0), p.fc) == pytest.approx(p.mttf, rel=1e-12)

    def test_doubling_voltage(self):
        c1, c2 = StressCondition(1.5, 80.0), StressCondition(3.0, 80.0)
        ratio = ttf_scaled(P, c2, 1.0) / ttf_scaled(P, c1, 1.0)
        assert ratio == pytest.approx(math.exp(-P.gamma * 1.5 * 10 / P.t_ox), rel=1e-12)

    def test_criterion_inside_arrhenius(self):
        p = P.replace(beta_fc=2.0)
        c = StressCondition(3.3, 60.0)
        arg = (p.e_a / p.boltzmann_k) * (1 / 333.0 - 1 / 398.0) * (4.0 / 2.0) ** 2
        expected = p.mttf * math.exp(-p.gamma * 3.3 * 10 / p.t_ox) * math.exp(arg)
        assert ttf_scaled(p, c, 4.0) == pytest.approx(expected, rel=1e-12)

    def test_geometry_bucket(self):
        p = P.replace(geom_scale={"default": 1.0, "long": 2.5})
        c = StressCondition(3.3, 60.0)
        assert ttf_scaled(p, c, 1.0, "long") == pytest.approx(2.5 * ttf_scaled(p, c, 1.0))
        with pytest.raises(DomainError):
            ttf_scaled(p, c, 1.0, "missing")

    def test_nonpositive_shift(self):
        with pytest.raises(DomainError):
            ttf_scaled(P, StressCondition(3.3, 60.0), 0.0)


class TestQuasiStatic:
    def test_constant(self):
        assert quasi_static_ttf([(0, 5.0), (1, 5.0), (3, 5.0)]) == pytest.approx(5.0, rel=1e-15)

    def test_two_level_against_quadrature(self):
        a, b = 3.0, 7.0
        # Oracle: adaptive quadrature of the piecewise-constant failure rate.
        rate = lambda t: 1 / a if t < 1.5 else 1 / b  # noqa: E731
        oracle = 1 / (quad(rate, 0, 3, points=[1.5])[0] / 3)
        assert oracle == pytest.approx(2 * a * b / (a + b), rel=1e-12)
        got = quasi_static_ttf([(0, a), (1, a), (2, b), (3, b)])
        assert got == pytest.approx(oracle, rel=1e-12)

    def test_refinement_converges(self):
        exact = 1.0 / (1.0 - math.exp(-1.0))  # TTF(t) = e^t on [0, 1]
        errors = []
        for n in (4, 8, 16, 32, 64):
            t = np.linspace(0, 1, n + 1)
            errors.append(abs(quasi_static_ttf(np.column_stack([t, np.exp(t)])) - exact))
        assert all(b < a for a, b in zip(errors, errors[1:]))
        assert errors[-1] / exact < 1e-3

    @pytest.mark.parametrize("series", [[], [(0, 1), (0, 2)], [(1, 1), (0, 2)], [(0, 1), (1, 0)]])
    def test_invalid(self, series):
        with pytest.raises(DomainError):
            quasi_static_ttf(series)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.1, 1e6), min_size=2, max_size=20))
    def test_bounded_by_extremes(self, ttfs):
        series = list(enumerate(ttfs))
        got = quasi_static_ttf(series)
        assert min(ttfs) * (1 - 1e-12) <= got <= max(ttfs) * (1 + 1e-12)


class TestMismatchSigma:
    def test_unit_area(self):
        assert mismatch_sigma(P, DeviceGeometry(1.0, 1.0)) == 5.0

    def test_area_four(self):
        assert mismatch_sigma(P, DeviceGeometry(4.0, 1.0)) == pytest.approx(2.5)

    def test_quadruple_area_halves(self):
        g1, g2 = DeviceGeometry(2.0, 3.0), DeviceGeometry(4.0, 6.0)
        assert mismatch_sigma(P, g2) == pytest.approx(mismatch_sigma(P, g1) / 2)

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_identity(self, w, l):
        assert mismatch_sigma(P, DeviceGeometry(w, l)) * math.sqrt(w * l) == pytest.approx(
            P.a_vt, rel=1e-14)

    def test_bad_geometry(self):
        with pytest.raises(DomainError):
            DeviceGeometry(0.0, 1.0)


class TestFailureRates:
    def test_single(self):
        assert aggregate_failure_rate([3e-7]) == 3e-7

    def test_additive(self):
        assert aggregate_failure_rate([0.5e-6, 0.5e-6]) == pytest.approx(1.0e-6)

    def test_negative(self):
        with pytest.raises(DomainError):
            aggregate_failure_rate([1e-6, -1e-9])

    def test_system_mttf(self):
        assert system_mttf([1e-6, 1e-6]) == pytest.approx(5e5)
        assert system_mttf([0.0]) == math.inf

    @given(st.lists(st.floats(0, 1e-3), min_size=1, max_size=10), st.randoms())
    def test_permutation_invariant(self, rates, rnd):
        shuffled = rates[:]
        rnd.shuffle(shuffled)
        assert aggregate_failure_rate(shuffled) == aggregate_failure_rate(rates)


class TestEquivalence:
    def test_identical_conditions(self):
        c = StressCondition(3.3, 110.0)
        assert equivalent_use_time(P, c, c, 168.0) * HOURS_PER_YEAR == pytest.approx(168.0)

    def test_burn_in(self):
        years = equivalent_use_time(P, StressCondition(4.6, 110.0), StressCondition(3.3, 110.0), 168.0)
        assert years * HOURS_PER_YEAR == pytest.approx(36706.32310512647, rel=1e-9)
        assert years == pytest.approx(4.19, abs=0.01)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1.0, 5.0), st.floats(1.0, 5.0), st.floats(0.0, 150.0), st.floats(0.1, 1000.0))
    def test_self_inverse(self, vs, vu, temp, hours):
        s, u = StressCondition(vs, temp), StressCondition(vu, 25.0)
        there = equivalent_use_time(P, s, u, hours) * HOURS_PER_YEAR
        back = equivalent_use_time(P, u, s, there) * HOURS_PER_YEAR
        assert back == pytest.approx(hours, rel=1e-9)

    def test_monotone_in_stress_voltage(self):
        u = StressCondition(3.3, 110.0)
        a = equivalent_use_time(P, StressCondition(4.0, 110.0), u, 168.0)
        b = equivalent_use_time(P, StressCondition(4.6, 110.0), u, 168.0)
        assert b > a

    def test_matches_shift_equality(self):
        s, u = StressCondition(4.6, 125.0), StressCondition(3.3, 60.0)
        years = equivalent_use_time(P, s, u, 168.0)
        assert delta_vt_accelerated(P, u, years) == pytest.approx(
            delta_vt_accelerated(P, s, 168.0 / HOURS_PER_YEAR), rel=1e-10)


class TestRelaxation:
    def test_disabled(self):
        assert extended_relaxation(4.0, 10.0, 0.0) == 4.0

    def test_no_window(self):
        assert extended_relaxation(4.0, 0.0, 0.3) == 4.0

    def test_half_life(self):
        assert extended_relaxation(4.0, 1.0, math.log(2)) == pytest.approx(2.0)

    @given(st.floats(0, 100), st.floats(0, 1e4), st.floats(-1, 10))
    def test_never_increases_or_negative(self, d, h, r):
        out = extended_relaxation(d, h, r)
        assert 0.0 <= out <= d


class TestParams:
    def test_published_values(self):
        assert (P.beta_v, P.e_a, P.n_exp, P.fc) == (0.75, 0.145, 0.181, 2.0)

    def test_betas_independent(self):
        p = P.replace(beta_fc=3.0)
        assert p.beta_v == 0.75 and p.beta_fc == 3.0

    @pytest.mark.parametrize("kw", [{"n_exp": 1.0}, {"n_exp": 0.0}, {"gamma": -1.0},
                                    {"t_ox": 0.0}, {"geom_scale": {}}])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            DegradationParams(**kw)

    def test_provisional(self):
        assert "a_vt" in P.provisional_fields()
        assert "a_vt" not in P.replace(a_vt=3.0).provisional_fields()
        assert "e_a" not in P.provisional_fields()

    def test_file_round_trip(self, tmp_path):
        p = P.replace(a_vt=3.5, geom_scale={"default": 1.0, "short": 0.8}, negate_arrhenius=True)
        path = tmp_path / "params.txt"
        text = dump_params(p)
        assert "provisional" in text
        path.write_text(text)
        assert load_params(path) == p

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("bogus_key = 1\n")
        with pytest.raises(ConfigError):
            load_params(path)

    def test_calibrate_prefactor(self):
        c = StressCondition(4.6, 110.0)
        a = calibrate_prefactor(P, c, 168 / HOURS_PER_YEAR, 5.239)
        assert delta_vt_accelerated(P.replace(a_prefactor=a), c, 168 / HOURS_PER_YEAR) == (
            pytest.approx(5.239, rel=1e-12))
