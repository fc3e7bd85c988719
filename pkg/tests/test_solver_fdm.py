import math

import numpy as np
import pytest

from errors import ConstitutiveRangeError
from integrators import OdeSystem, ToleranceSpec, integrate_adaptive_rk
from models import BoundarySignal, DimensionlessProblem, nondimensionalize
from solver_fdm import FdmGrid, output_times, rhs_linear_heat, rhs_nonlinear_moisture, solve_fdm


def _constant(value: float) -> BoundarySignal:
    return BoundarySignal.sinusoid(value, [], [])


def _heat(initial, left: float, right: float, tau_star: float, fo: float = 1.0) -> DimensionlessProblem:
    return DimensionlessProblem(physics="heat", fo=fo, left=_constant(left), right=_constant(right),
                                initial=initial, tau_star=tau_star, scale=1.0, length=1.0, t_ref=1.0)


def _sine(x):
    return np.sin(math.pi * x)


def test_grid_layout():
    grid = FdmGrid(n_cells=4)
    assert grid.dx == 0.25
    assert np.allclose(grid.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(grid.interior, [0.25, 0.5, 0.75])


def test_rhs_vanishes_on_constant_and_linear_profiles():
    grid = FdmGrid(n_cells=10)
    assert np.all(rhs_linear_heat(np.full(9, 3.0), 0.7, grid, 3.0, 3.0) == 0.0)
    x = grid.interior
    assert np.max(np.abs(rhs_linear_heat(1.0 + 2.0 * x, 0.7, grid, 1.0, 3.0))) < 1e-10


def test_nonlinear_rhs_with_unit_coefficients_matches_linear():
    grid = FdmGrid(n_cells=12)
    state = 1.0 + 0.1 * np.random.default_rng(0).standard_normal(11)
    ones = np.ones_like
    lin = rhs_linear_heat(state, 0.3, grid, 1.2, 0.8)
    nonlin = rhs_nonlinear_moisture(state, 0.3, grid, ones, ones, 1.2, 0.8)
    assert np.max(np.abs(lin - nonlin)) < 1e-10


def test_nonlinear_rhs_rejects_non_positive_capacity():
    grid = FdmGrid(n_cells=4)
    with pytest.raises(ConstitutiveRangeError) as info:
        rhs_nonlinear_moisture(np.array([1.0, -1.0, 1.0]), 1.0, grid, np.ones_like, lambda v: v, 1.0, 1.0)
    assert info.value.location == pytest.approx(0.5)


def test_sine_mode_decay_is_second_order():
    tau = 0.1
    tol = ToleranceSpec(abs_tol=1e-10, rel_tol=1e-10)
    p = _heat(_sine, 0.0, 0.0, tau)
    errors = []
    for n in (10, 20):
        grid = FdmGrid(n_cells=n)
        field = solve_fdm(p, grid, tol=tol, samples_per_unit=10.0)
        exact = math.exp(-math.pi ** 2 * tau) * _sine(grid.nodes)
        errors.append(np.max(np.abs(field.final_profile - exact)))
    assert errors[0] < 5e-3
    assert 3.0 < errors[0] / errors[1] < 5.0


def test_constant_boundaries_reach_linear_steady_state():
    grid = FdmGrid(n_cells=20)
    field = solve_fdm(_heat(1.0, 1.0, 2.0, 2.0), grid, tol=ToleranceSpec(abs_tol=1e-8, rel_tol=1e-8))
    assert np.max(np.abs(field.final_profile - (1.0 + grid.nodes))) < 1e-6


def test_uniform_problem_stays_uniform(constant_heat_problem):
    field = solve_fdm(nondimensionalize(constant_heat_problem), FdmGrid(n_cells=10))
    assert field.values.shape == (7, 11)
    assert np.all(field.values == 1.0)


def test_heat_case_output_layout(heat_dimless):
    field = solve_fdm(heat_dimless, FdmGrid(n_cells=20))
    assert field.values.shape == (25, 21)
    assert np.allclose(field.t_samples, np.arange(25.0))
    assert np.allclose(field.values[:, 0], heat_dimless.left.evaluate(field.t_samples))
    assert np.allclose(field.values[:, -1], heat_dimless.right.evaluate(field.t_samples))
    assert field.values[0, 10] == 1.0
    assert field.cpu_seconds > 0
    assert field.solver_id == "FDM"


def test_output_times_density(heat_dimless):
    t = output_times(heat_dimless, samples_per_unit=4.0)
    assert t.size == 97
    assert t[-1] == heat_dimless.tau_star


def test_moisture_integrators_agree(moisture_dimless):
    grid = FdmGrid(n_cells=20)
    tol = ToleranceSpec(abs_tol=1e-7, rel_tol=1e-7)
    rk = solve_fdm(moisture_dimless, grid, tol=tol, integrator="rk")
    stiff = solve_fdm(moisture_dimless, grid, tol=tol, integrator="stiff")
    assert np.max(np.abs(rk.values - stiff.values)) < 1e-4
    assert np.all(rk.values > 0)
    # 境界値の範囲 1 ± 0.8 を超えない（最大値原理）
    assert rk.values.min() >= 0.2 - 1e-6
    assert rk.values.max() <= 1.8 + 1e-6


def _step(x):
    return np.where((x > 0.3) & (x < 0.7), 1.0, 0.0)


def test_discrete_maximum_principle():
    grid = FdmGrid(n_cells=40)
    p = _heat(_step, 0.0, 0.0, 0.5)
    field = solve_fdm(p, grid, tol=ToleranceSpec(abs_tol=1e-9, rel_tol=1e-9), samples_per_unit=20.0)
    assert field.values.min() >= -1e-7
    assert field.values.max() <= 1.0 + 1e-7
    peaks = field.values[:, 1:-1].max(axis=1)
    assert np.all(np.diff(peaks) <= 1e-7)


def _kappa_quadratic(v):
    return 1.0 + v * v


def _manufactured(x, t):
    return 1.0 + 0.5 * math.exp(-t) * np.sin(math.pi * x)


def _manufactured_source(x, t):
    """v_t − ∂x(κ(v)·v_x) for the manufactured v"""
    e, s, c = math.exp(-t), np.sin(math.pi * x), np.cos(math.pi * x)
    v = 1.0 + 0.5 * e * s
    vx = 0.5 * math.pi * e * c
    vxx = -0.5 * math.pi ** 2 * e * s
    vt = -0.5 * e * s
    return vt - (2.0 * v * vx * vx + _kappa_quadratic(v) * vxx)


def test_nonlinear_scheme_is_second_order_on_manufactured_solution():
    t1 = 0.5
    tol = ToleranceSpec(abs_tol=1e-11, rel_tol=1e-11)
    errors = []
    for n in (10, 20, 40):
        grid = FdmGrid(n_cells=n)
        x = grid.interior

        def rhs(t, v, grid=grid, x=x):
            return rhs_nonlinear_moisture(v, 1.0, grid, _kappa_quadratic, np.ones_like, 1.0, 1.0) \
                + _manufactured_source(x, t)

        traj = integrate_adaptive_rk(OdeSystem(dimension=n - 1, rhs=rhs), 0.0, t1, _manufactured(x, 0.0),
                                     tol, [t1])
        errors.append(np.max(np.abs(traj.states[-1] - _manufactured(x, t1))))
    assert errors[0] < 2e-2
    assert 3.0 < errors[0] / errors[1] < 5.0
    assert 3.5 < errors[1] / errors[2] < 4.5
