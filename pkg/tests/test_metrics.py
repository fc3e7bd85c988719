import math

import numpy as np
import pytest

from errors import ContractError, LocationError, OutOfRangeError, UndefinedScdError
from metrics import (
    SCD_CAP, ErrorReport, FluxSeries, aggregate, conduction_load, daily_loads, eps2_profile, eps_inf, error_report,
    flux, flux_eps_inf, flux_location, flux_scale, r_cpu, resample, scd,
)
from models import SolutionField

HOUR = 3600.0
DAY = 24 * HOUR


def _field(values, x=None, t=None, coeffs=None, solver_id="sol"):
    values = np.asarray(values, dtype=float)
    x = np.linspace(0.0, 1.0, values.shape[1]) if x is None else x
    t = np.arange(values.shape[0], dtype=float) if t is None else t
    return SolutionField(x_nodes=x, t_samples=t, values=values, solver_id=solver_id, coeffs=coeffs)


def _constant_flux(value: float, days: int) -> FluxSeries:
    t = np.arange(0.0, days * DAY + 1.0, HOUR)
    return FluxSeries(t_samples=t, q=np.full(t.size, value), location=1.0)


def test_eps2_of_constant_offset():
    ref = _field(np.ones((5, 4)))
    sol = _field(np.ones((5, 4)) + 0.01)
    profile = eps2_profile(sol, ref)
    assert np.allclose(profile, 0.01)
    assert eps_inf(profile) == pytest.approx(0.01)


def test_eps2_needs_matching_grids():
    with pytest.raises(ContractError):
        eps2_profile(_field(np.ones((5, 4))), _field(np.ones((5, 3))))


def test_scd_examples():
    ref = _field(np.ones((3, 4)))
    assert scd(_field(np.full((3, 4), 1.001)), ref) == pytest.approx(3.0)
    assert scd(ref, ref) == SCD_CAP
    zero = _field(np.zeros((3, 4)))
    with pytest.raises(UndefinedScdError):
        scd(ref, zero)


def test_flux_of_linear_profile():
    x = np.linspace(0.0, 1.0, 11)
    values = np.tile(1.0 + 2.0 * x, (3, 1))
    k = lambda u: np.full(np.shape(u), 0.5)  # noqa: E731
    for hint in ("fdm", "rc"):
        q = flux(_field(values, x=x), hint, k, 1.0)
        assert np.allclose(q.q, -1.0)
        q_left = flux(_field(values, x=x), hint, k, 0.0)
        assert np.allclose(q_left.q, -1.0)
    # u = 1 + 2x* = 2 + X
    coeffs = np.tile([2.0, 1.0, 0.0], (3, 1))
    q = flux(_field(values, x=x, coeffs=coeffs), "spectral", k, 1.0)
    assert np.allclose(q.q, -1.0)


def test_rc_flux_uses_harmonic_mean():
    x = np.array([0.0, 0.5, 1.0])
    values = np.tile([1.0, 2.0, 4.0], (2, 1))
    q = flux(_field(values, x=x), "rc", lambda u: np.asarray(u), 1.0)
    cond = 2.0 * 2.0 * 4.0 / 6.0
    assert np.allclose(q.q, -cond * 2.0 / 0.5)


def test_flux_location_must_be_a_node():
    field = _field(np.ones((2, 5)))
    with pytest.raises(LocationError):
        flux(field, "fdm", np.ones_like, 0.3)


def test_flux_error_is_rms_in_time():
    t = np.arange(4.0)
    a = FluxSeries(t_samples=t, q=[0.0, 0.0, 0.0, 0.0], location=1.0)
    b = FluxSeries(t_samples=t, q=[1.0, -1.0, 1.0, -1.0], location=1.0)
    assert flux_eps_inf(a, b) == pytest.approx(1.0)


def test_flux_scale_and_cpu_ratio(heat_problem):
    assert flux_scale(heat_problem) == pytest.approx(2.0 * 20.0 / 0.1)
    assert r_cpu(0.5, 24 * HOUR) == pytest.approx(500.0 / 24.0)


def test_conduction_load_of_constant_flux():
    q = _constant_flux(5.0, 1)
    assert conduction_load(q, 0.0, DAY) == pytest.approx(5.0 * DAY)


def test_conduction_load_of_full_sine_period():
    t = np.linspace(0.0, DAY, 97)
    q = FluxSeries(t_samples=t, q=3.0 * np.sin(2 * math.pi * t / DAY), location=0.0)
    assert abs(conduction_load(q, 0.0, DAY)) < 1e-9 * 3.0 * DAY


def test_conduction_load_is_additive():
    t = np.linspace(0.0, 10.0, 11)
    q = FluxSeries(t_samples=t, q=t ** 2, location=0.0)
    whole = conduction_load(q, 0.0, 10.0)
    assert conduction_load(q, 0.0, 3.7) + conduction_load(q, 3.7, 10.0) == pytest.approx(whole, rel=1e-12)


def test_conduction_load_outside_series():
    q = _constant_flux(1.0, 1)
    with pytest.raises(OutOfRangeError):
        conduction_load(q, 0.0, 2 * DAY)
    with pytest.raises(OutOfRangeError):
        conduction_load(q, 5.0, 5.0)


def test_daily_loads():
    loads = daily_loads(_constant_flux(1.0, 3))
    assert loads.values.size == 3
    assert np.allclose(loads.values, DAY)
    assert np.allclose(loads.starts, [0.0, DAY, 2 * DAY])


def test_aggregate_last_window_includes_end_sample():
    t = np.arange(0.0, 3 * DAY + 1.0, HOUR)
    values = np.floor(t / DAY)
    means = aggregate(t, values, "daily")
    assert means.values.size == 3
    assert means.values[0] == 0.0
    assert means.values[1] == 1.0
    assert means.values[2] == pytest.approx((24 * 2.0 + 3.0) / 25)


def test_aggregate_partial_window():
    t = np.arange(0.0, 30 * HOUR + 1.0, HOUR)
    means = aggregate(t, np.ones_like(t), "daily")
    assert means.values.size == 2
    assert means.ends[-1] == 30 * HOUR


def test_aggregate_monthly_over_a_year():
    t = np.arange(0.0, 365 * DAY + 1.0, DAY)
    assert aggregate(t, np.ones_like(t), "monthly").values.size == 13


def test_aggregate_rejects_unknown_period():
    with pytest.raises(ContractError):
        aggregate([0.0, 1.0], [1.0, 1.0], "weekly")


def test_flux_location_keywords():
    assert flux_location("left", 0.1) == 0.0
    assert flux_location("right", 0.1) == 0.1
    assert flux_location(0.05, 0.1) == 0.05
    with pytest.raises(LocationError):
        flux_location(0.2, 0.1)


def test_resample_linear_and_spectral():
    x = np.linspace(0.0, 1.0, 3)
    field = _field(np.tile([0.0, 1.0, 4.0], (2, 1)), x=x)
    mid = resample(field, [0.25, 0.75])
    assert np.allclose(mid.values, [[0.5, 2.5], [0.5, 2.5]])
    # u = X² = (T0 + T2)/2
    spectral = _field(np.tile([1.0, 0.0, 1.0], (2, 1)), x=x, coeffs=np.tile([0.5, 0.0, 0.5], (2, 1)))
    exact = resample(spectral, [0.25])
    assert np.allclose(exact.values, 0.25)


def test_error_report_of_identical_fields(heat_problem):
    x = np.linspace(0.0, 1.0, 5)
    t = np.linspace(0.0, heat_problem.tau_star, 25)
    ref = SolutionField(x_nodes=x, t_samples=t, values=np.ones((25, 5)), solver_id="ref", cpu_seconds=0.0)
    sol = SolutionField(x_nodes=x, t_samples=t, values=np.ones((25, 5)), solver_id="sol", cpu_seconds=0.24)
    report = error_report(sol, ref, heat_problem, np.ones_like, "fdm")
    assert report.eps_inf == 0.0
    assert report.scd == SCD_CAP
    assert report.flux_eps_inf == 0.0
    assert report.r_cpu_ms_per_h == pytest.approx(10.0)


def test_error_report_consistency_check():
    with pytest.raises(ContractError):
        ErrorReport(solver_id="x", eps2_profile=np.array([0.1, 0.2]), eps_inf=0.1, flux_eps_inf=0.0,
                    flux_eps_inf_dimensional=0.0, scd=1.0, r_cpu_ms_per_h=0.0, cpu_seconds=0.0)


def test_error_report_scores_at_solver_nodes(heat_problem):
    # 参照解 u = 1.5 + 0.5·T2(X) = 1 + X²、3 節点の解は節点上で厳密
    t = np.linspace(0.0, heat_problem.tau_star, 25)
    fine = np.linspace(0.0, 1.0, 101)
    X = 2.0 * fine - 1.0
    ref = SolutionField(x_nodes=fine, t_samples=t, values=np.tile(1.0 + X ** 2, (25, 1)), solver_id="ref",
                        coeffs=np.tile([1.5, 0.0, 0.5], (25, 1)))
    coarse = np.array([0.0, 0.5, 1.0])
    sol = SolutionField(x_nodes=coarse, t_samples=t, values=np.tile([2.0, 1.0, 2.0], (25, 1)), solver_id="R2C",
                        cpu_seconds=0.0)
    own = error_report(sol, ref, heat_problem, np.ones_like, "rc")
    assert np.array_equal(own.x_nodes, coarse)
    assert own.eps2_profile.size == 3
    assert own.eps_inf < 1e-12
    assert own.scd > 12.0
    # 温度偏差は壁全体で評価（節点間は線形補間）
    assert own.max_abs_deviation == pytest.approx(0.25 * heat_problem.scale, rel=1e-9)
    # 共通格子へ線形補間すると補間誤差（x = 0.25 で 0.25）が混入する
    shared = error_report(sol, ref, heat_problem, np.ones_like, "rc", x_nodes=fine)
    assert shared.eps2_profile.size == 101
    assert shared.eps_inf == pytest.approx(0.25, rel=1e-9)


def test_flux_noise_amplification():
    # 節点ごとに無相関な摂動 ±δ → 片側差分の流束誤差は 2δ/Δx のオーダー
    rng = np.random.default_rng(11)
    n_t, delta = 2000, 1e-4
    x = np.linspace(0.0, 1.0, 101)
    clean = np.tile(1.0 + 0.5 * x, (n_t, 1))
    noisy = clean + delta * rng.choice([-1.0, 1.0], size=clean.shape)
    k = np.ones_like
    q_clean = flux(_field(clean, x=x), "fdm", k, 1.0)
    q_noisy = flux(_field(noisy, x=x), "fdm", k, 1.0)
    predicted = 2.0 * delta / (x[1] - x[0])
    measured = flux_eps_inf(q_noisy, q_clean)
    assert predicted / 2.0 <= measured <= 2.0 * predicted
    # Δx を半分にすると誤差はほぼ倍になる
    x2 = np.linspace(0.0, 1.0, 201)
    noisy2 = np.tile(1.0 + 0.5 * x2, (n_t, 1)) + delta * rng.choice([-1.0, 1.0], size=(n_t, 201))
    measured2 = flux_eps_inf(flux(_field(noisy2, x=x2), "fdm", k, 1.0),
                             flux(_field(np.tile(1.0 + 0.5 * x2, (n_t, 1)), x=x2), "fdm", k, 1.0))
    assert 1.6 < measured2 / measured < 2.4
