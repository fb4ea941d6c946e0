"""Acceptance gate: one test per criterion, each with its runtime budget.

Every test records a PASS/FAIL line that is echoed in the pytest terminal
summary (see ``conftest.pytest_terminal_summary``) and also printed directly,
so ``pytest tests/test_acceptance.py -s`` shows it inline.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import ACCEPTANCE_RESULTS, brute_force_metrics
from nbti_burnin import golden
from nbti_burnin.dac import (
    CurrentSteeringDac,
    DacTopology,
    DeviceState,
    TransferFunction,
    build_dac,
    dac_population,
    fresh_states,
    transfer_function,
)
from nbti_burnin.device_models import (
    HOURS_PER_YEAR,
    DegradationParams,
    StressCondition,
    equivalent_use_time,
    fit_powerlaw_slope,
    quasi_static_ttf,
)
from nbti_burnin.harness import (
    ScenarioConfig,
    burn_in_stress,
    calibration_report,
    emit_powerlaw_series,
    equivalence_report,
    run_full,
)
from nbti_burnin.metrics import dnl, endpoint_fit, gain_error, inl, offset_error, percent_change
from nbti_burnin.stress import pair_vt_mismatch, run_stress_mode

P = DegradationParams()


@contextmanager
def criterion(number, title, budget_s):
    """Run a criterion body, enforce its time budget and record the outcome."""
    start = time.perf_counter()
    detail = []
    try:
        yield detail
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"took {elapsed:.2f} s, budget {budget_s} s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        line = f"FAIL  {number}. {title} ({elapsed:.3f} s): {exc}"
        ACCEPTANCE_RESULTS[number] = line
        print(line)
        raise
    line = f"PASS  {number}. {title} ({elapsed:.3f} s)" + (f": {'; '.join(detail)}" if detail else "")
    ACCEPTANCE_RESULTS[number] = line
    print(line)


def test_1_gain_error_reproduction():
    with criterion(1, "gain error from the post-burn-in ramp", 1.0) as note:
        codes, _, post = golden.table4_ramps()
        fit = endpoint_fit(TransferFunction(codes, post), 2.5)
        ge = gain_error(fit)
        assert abs(fit.gain - 3.585 / 2.5) <= 1e-6
        assert abs(ge - 43.5) <= 0.15
        note.append(f"A_v = {fit.gain:.6f}, gain error = {ge:.3f}% (published 43.5%)")


def test_2_percent_change_golden_tables():
    with criterion(2, "percent-change golden tables", 1.0) as note:
        worst = 0.0
        count = 0
        for table in ("dac_simulation", "burnin_experiment"):
            rows = golden.load_table(table)
            assert len(rows) == 5
            for r in rows:
                pct = percent_change(float(r["pre"]), float(r["post"]))
                err = abs(pct - float(r["percent_change"]))
                assert err <= 0.15, f"{table}/{r['metric']}: {pct:.3f} vs {r['percent_change']}"
                worst = max(worst, err)
                count += 1
        assert count == 10
        note.append(f"10 rows, worst deviation {worst:.3f} pp")


def test_3_powerlaw_round_trip():
    with criterion(3, "power-law round trip and voltage ordering", 1.0) as note:
        series = emit_powerlaw_series(P.replace(n_exp=0.181))
        for v, (_, n) in series.fits.items():
            assert abs(n - 0.181) <= 1e-9, f"{v} V: n = {n}"
        t = np.logspace(-2, 4, 40)
        _, n = fit_powerlaw_slope(np.column_stack([t, 3.7 * t ** 0.181]))
        assert abs(n - 0.181) <= 1e-9
        assert series.dominates(4.6, 3.3)
        note.append(f"recovered n = {series.fits[4.6][1]:.12f}; 4.6 V curve above 3.3 V")


def test_4_quasi_static_integral():
    with criterion(4, "quasi-static TTF integral", 1.0) as note:
        a, b = 2.0, 9.0
        got = quasi_static_ttf([(0.0, a), (1.0, a), (2.0, b), (3.0, b)])
        assert got == pytest.approx(2 * a * b / (a + b), rel=1e-12)

        # Two-level waveform switching off-grid. The oracle integrates the exact
        # piecewise rate; the trapezoid mesh smears the jump over one cell, so
        # the mean-rate error is bounded by h/2 * |1/a - 1/b| (first order).
        t_switch = 1 / math.sqrt(2)
        ttf = lambda t: np.where(t < t_switch, a, b)  # noqa: E731
        oracle_rate = quad(lambda t: 1 / float(ttf(t)), 0, 1, points=[t_switch])[0]
        assert oracle_rate == pytest.approx(t_switch / a + (1 - t_switch) / b, rel=1e-12)
        jump = abs(1 / a - 1 / b)
        errors = []
        for m in (2 ** k for k in range(4, 14)):
            t = np.linspace(0, 1, m + 1)
            rate_err = abs(1 / quasi_static_ttf(np.column_stack([t, ttf(t)])) - oracle_rate)
            assert rate_err <= 0.5 * jump / m * (1 + 1e-9), f"mesh {m}: {rate_err}"
            errors.append(abs(quasi_static_ttf(np.column_stack([t, ttf(t)])) - 1 / oracle_rate))
        assert errors[-1] < errors[0] / 100  # 512x finer mesh
        note.append(f"2ab/(a+b) exact; mesh error within the O(h) bound down to h = 1/8192 "
                    f"(final TTF error {errors[-1]:.1e})")


def test_5_mismatch_spec_check():
    with criterion(5, "mismatch spec flags under calibrated pre-factor", 5.0) as note:
        cal = calibration_report(P)
        params = P.replace(a_prefactor=cal.a_prefactor)
        limit = golden.scalar("vt_mismatch_spec")
        burn = max(pair_vt_mismatch(burn_in_stress(params, 4.6), role="current_source").values())
        nominal = max(pair_vt_mismatch(burn_in_stress(params, 3.3),
                                       role="current_source").values())
        assert burn == pytest.approx(5.239, rel=1e-9)
        assert burn > limit
        assert nominal < limit
        text = cal.render()
        assert f"{cal.model_ratio:.4f}" in text and f"{cal.paper_ratio:.4f}" in text
        assert cal.model_ratio == pytest.approx(2.65, abs=0.01)
        assert cal.paper_ratio == pytest.approx(5.81, abs=0.01)
        note.append(f"4.6 V: {burn:.3f} mV flagged; 3.3 V: {nominal:.3f} mV passes; "
                    f"ratio model {cal.model_ratio:.2f} vs published {cal.paper_ratio:.2f}")
        print(text, end="")


def test_6_linearity_gain_orthogonality():
    with criterion(6, "uniform shift moves gain, not linearity", 1.0) as note:
        topo = DacTopology(bits=6)
        fresh = build_dac(topo, fresh_states(topo))
        tf0 = transfer_function(fresh)
        worst = 0.0
        for shift in (0.5, 5.239, 20.0):
            aged_states = [DeviceState(s.device_id, s.role, s.fresh_vt,
                                       shift if s.role == "current_source" else 0.0,
                                       s.geometry, s.pair_id) for s in fresh_states(topo)]
            tf1 = transfer_function(build_dac(topo, aged_states))
            dg = gain_error(endpoint_fit(tf1, topo.v_ref)) - gain_error(endpoint_fit(tf0, topo.v_ref))
            assert dg != 0.0 and abs(dg) > 1e-6
            for f in (dnl, inl):
                delta = np.max(np.abs(f(tf1).values - f(tf0).values))
                assert delta <= 1e-12
                worst = max(worst, delta)

        # Same property on a mismatched array: a common factor on every cell.
        rng = np.random.default_rng(6)
        cells = topo.unit_current_ma * (1 + 0.02 * rng.standard_normal(topo.n_cells))
        base = transfer_function(CurrentSteeringDac.from_cell_currents(topo, cells))
        scaled = transfer_function(CurrentSteeringDac.from_cell_currents(topo, 0.947 * cells))
        for f in (dnl, inl):
            delta = np.max(np.abs(f(scaled).values - f(base).values))
            assert delta <= 1e-12
            worst = max(worst, delta)
        assert gain_error(endpoint_fit(scaled, topo.v_ref)) != gain_error(
            endpoint_fit(base, topo.v_ref))
        note.append(f"max DNL/INL change {worst:.1e} LSB")


def test_7_metric_oracle_equivalence():
    with criterion(7, "metrics match brute-force recomputation", 10.0) as note:
        rng = np.random.default_rng(7)
        for i in range(100):
            topo = DacTopology(bits=4, leakage_ma=float(rng.uniform(0, 0.01)))
            sf = run_stress_mode(P, ScenarioConfig().schedule, dac_population(topo),
                                 seed=i, mismatch="sampled")
            tf = transfer_function(build_dac(topo, sf))
            ref = brute_force_metrics(tf.codes, list(tf.v_out), topo.v_ref)
            np.testing.assert_allclose(dnl(tf).values, ref["dnl"], rtol=0, atol=1e-12)
            np.testing.assert_allclose(inl(tf).values, ref["inl"], rtol=0, atol=1e-12)
            fit = endpoint_fit(tf, topo.v_ref)
            assert abs(fit.gain - ref["gain"]) <= 1e-12
            assert abs(gain_error(fit) - ref["gain_error"]) <= 1e-12
            assert abs(offset_error(tf) - ref["offset"]) <= 1e-12
        note.append("100 sampled 4-bit instances")


def test_8_determinism(tmp_path):
    with criterion(8, "byte-identical reruns", 10.0) as note:
        cfg = ScenarioConfig(seed=42, samples=10, mismatch="sampled")
        for d in ("a", "b"):
            run_full(cfg.replace(out_dir=tmp_path / d))
        names = ("stress.tsv", "transfer_pre.csv", "transfer_post.csv", "manifest.json")
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        note.append(", ".join(names) + " identical")


def test_9_equivalence_report():
    with criterion(9, "burn-in to use-time equivalence", 1.0) as note:
        stress, use = StressCondition(4.6, 110.0), StressCondition(3.3, 110.0)
        years = equivalent_use_time(P, stress, use, 168.0)
        expected_h = 168 * math.exp(0.975 / 0.181)
        assert years * HOURS_PER_YEAR == pytest.approx(expected_h, rel=1e-9)
        rep = equivalence_report(P, stress, use, 168.0)
        assert rep.paper_years == 7
        assert "gap" in rep.render()
        note.append(f"{years * HOURS_PER_YEAR:.1f} h = {years:.3f} years; "
                    f"published 7 years recorded as a gap")
