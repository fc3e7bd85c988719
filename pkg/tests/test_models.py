import math

import numpy as np
import pytest

from cases import annual_wall_problem
from errors import ContractError, InvalidProblemError, OutOfRangeError
from models import (
    BoundarySignal, DiffusionProblem, HeatMaterial, MoistureMaterial, SolutionField, nondimensionalize,
    redimensionalize, sample_boundary, saturation_pressure, to_dimensionless,
)


def test_heat_fourier_number(heat_problem):
    assert nondimensionalize(heat_problem).fo == pytest.approx(0.36, rel=1e-12)


def test_annual_wall_fourier_number():
    p = annual_wall_problem(seed=1)
    assert nondimensionalize(p).fo == pytest.approx(2.48 * 3600.0 / (2.8e6 * 0.25), rel=1e-12)
    assert nondimensionalize(p).fo == pytest.approx(1.275e-2, rel=1e-3)


def test_fourier_number_scales_with_reference_time(heat_problem):
    fo = nondimensionalize(heat_problem).fo
    doubled = heat_problem.model_copy(update={"t_ref": 2 * heat_problem.t_ref})
    assert nondimensionalize(doubled).fo == pytest.approx(2 * fo, rel=1e-12)


def test_moisture_reference_properties(moisture_problem, moisture_dimless):
    m = moisture_problem.material
    kappa0 = 6.72e-13 * moisture_problem.scale + 3e-10
    assert moisture_dimless.fo == pytest.approx(kappa0 * 3600.0 / (1.88e-2 * 0.1 ** 2), rel=1e-12)
    assert moisture_dimless.kappa_star(1.0) == pytest.approx(1.0)
    assert moisture_dimless.xi_star(1.0) == pytest.approx(1.0)
    assert float(m.kappa(moisture_problem.scale)) == pytest.approx(kappa0)


def test_saturation_pressure_at_25c():
    assert float(saturation_pressure(25.0)) == pytest.approx(3167.0, rel=2e-3)


def test_dimensionless_initial_field_is_one(heat_dimless, moisture_dimless):
    x = np.linspace(0, 1, 11)
    assert np.all(heat_dimless.initial_profile(x) == 1.0)
    assert np.allclose(moisture_dimless.initial_profile(x), 1.0, rtol=0, atol=1e-15)


def test_sample_boundary_sinusoid(heat_problem):
    assert sample_boundary(heat_problem.left, 0.0) == pytest.approx(20.0)
    assert sample_boundary(heat_problem.left, 6 * 3600.0) == pytest.approx(30.0)


def test_sample_boundary_sampled_midpoint():
    b = BoundarySignal.sampled([0.0, 3600.0], [5.0, 7.0])
    assert sample_boundary(b, 1800.0) == pytest.approx(6.0)
    assert np.allclose(sample_boundary(b, np.array([0.0, 3600.0])), [5.0, 7.0])


def test_sample_boundary_outside_horizon():
    b = BoundarySignal.sampled([0.0, 3600.0], [5.0, 7.0])
    with pytest.raises(OutOfRangeError):
        sample_boundary(b, 7200.0)


def test_boundary_bounds_and_scaling():
    b = BoundarySignal.sinusoid(20.0, [10.0, 4.0], [86400.0, 10800.0])
    assert b.bounds() == (6.0, 34.0)
    scaled = b.scaled(20.0, 3600.0)
    assert scaled.evaluate(6.0) == pytest.approx(b.evaluate(6 * 3600.0) / 20.0)


def test_redimensionalize_identity_scaling(heat_problem):
    x = np.linspace(0, 1, 5)
    t = np.linspace(0, heat_problem.tau_star, 25)
    field = SolutionField(x_nodes=x, t_samples=t, values=np.ones((25, 5)), solver_id="ones")
    phys = redimensionalize(field, heat_problem)
    assert np.all(phys.values == 20.0)
    assert phys.x_nodes[-1] == pytest.approx(0.1)
    assert phys.t_samples[-1] == pytest.approx(24 * 3600.0)


def test_redimensionalize_round_trip(moisture_problem):
    rng = np.random.default_rng(3)
    x = np.linspace(0, 1, 7)
    t = np.linspace(0, moisture_problem.tau_star, 73)
    values = 1.0 + 0.2 * rng.standard_normal((73, 7))
    field = SolutionField(x_nodes=x, t_samples=t, values=values, solver_id="rand")
    back = to_dimensionless(redimensionalize(field, moisture_problem), moisture_problem)
    assert np.max(np.abs(back.values - values)) < 1e-12
    assert redimensionalize(
        SolutionField(x_nodes=x, t_samples=t, values=np.ones((73, 7)), solver_id="ones"),
        moisture_problem).values[0, 0] == pytest.approx(moisture_problem.scale)


def test_redimensionalize_rejects_physical_field(heat_problem):
    field = SolutionField(x_nodes=[0.0, 0.1], t_samples=[0.0, 86400.0], values=np.ones((2, 2)),
                          solver_id="phys", units="physical")
    with pytest.raises(ContractError):
        redimensionalize(field, heat_problem)


def test_profile_initial_needs_reference_value(heat_problem):
    with pytest.raises(InvalidProblemError):
        DiffusionProblem(physics="heat", material=heat_problem.material, L=0.1, left=heat_problem.left,
                         right=heat_problem.right, initial=lambda x: 20.0 + x, tau=3600.0, t_ref=3600.0)


def test_physics_material_mismatch(heat_problem):
    with pytest.raises(InvalidProblemError):
        DiffusionProblem(physics="moisture", material=HeatMaterial(k=1.0, rho=1.0, c=1.0), L=0.1,
                         left=heat_problem.left, right=heat_problem.right, initial=20.0,
                         tau=3600.0, t_ref=3600.0)


def test_moisture_material_needs_one_capacity():
    with pytest.raises(InvalidProblemError):
        MoistureMaterial(kappa_slope=0.0, kappa_intercept=1e-10, xi=1.0, xi_table=[(0.0, 1.0), (1.0, 2.0)])
    table = MoistureMaterial(kappa_slope=0.0, kappa_intercept=1e-10, xi_table=[(0.0, 1.0), (2.0, 3.0)])
    assert float(table.capacity(1.0)) == pytest.approx(2.0)


def test_solution_field_contracts():
    with pytest.raises(ContractError):
        SolutionField(x_nodes=[0.0, 1.0], t_samples=[0.0, 1.0, 3.0], values=np.zeros((3, 2)), solver_id="x")
    with pytest.raises(ContractError):
        SolutionField(x_nodes=[0.0, 1.0], t_samples=[0.0, 1.0], values=[[0.0, math.nan], [0.0, 0.0]],
                      solver_id="x")
    with pytest.raises(ContractError):
        SolutionField(x_nodes=[0.0, 1.0], t_samples=[0.0, 1.0], values=np.zeros((2, 3)), solver_id="x")
