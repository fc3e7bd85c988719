import math

import numpy as np
import pytest

from errors import OracleDivergenceError
from integrators import ToleranceSpec
from metrics import eps2_profile, eps_inf
from models import BoundarySignal, DimensionlessProblem, nondimensionalize
from oracle import CROSS_TOL_LINEAR, CROSS_TOL_NONLINEAR, OracleLevel, reference_solution
from solver_fdm import FdmGrid, solve_fdm


def _sine_bump(x):
    return 1.0 + 0.1 * np.sin(math.pi * x)


@pytest.fixture
def bump_problem():
    one = BoundarySignal.sinusoid(1.0, [], [])
    return DimensionlessProblem(physics="heat", fo=1.0, left=one, right=one, initial=_sine_bump,
                                tau_star=0.1, scale=1.0, length=1.0, t_ref=1.0)


def test_level_defaults():
    level = OracleLevel()
    assert level.order_for("heat") == 24
    assert level.order_for("moisture") == 32
    assert level.intervals_for(100) == 400
    assert level.threshold_for("heat") == CROSS_TOL_LINEAR
    assert level.threshold_for("moisture") == CROSS_TOL_NONLINEAR
    assert OracleLevel(spectral_order=12, fdm_intervals=50).intervals_for(100) == 50


def test_reference_of_decaying_sine(bump_problem):
    level = OracleLevel(spectral_order=16, fdm_intervals=100, threshold=1e-5)
    ref, certificate = reference_solution(bump_problem, level, samples_per_unit=10.0)
    exact = 1.0 + 0.1 * math.exp(-math.pi ** 2 * 0.1) * np.sin(math.pi * ref.x_nodes)
    assert certificate.accepted
    assert certificate.cross_eps_inf < 1e-5
    assert certificate.spectral_order == 16
    assert certificate.fdm_intervals == 100
    assert ref.solver_id == "Reference"
    assert ref.x_nodes.size == 101
    assert np.max(np.abs(ref.final_profile - exact)) < 1e-7


def test_parallel_matches_serial(bump_problem):
    serial, _ = reference_solution(bump_problem, OracleLevel(spectral_order=12, fdm_intervals=40, threshold=1e-3))
    parallel, _ = reference_solution(
        bump_problem, OracleLevel(spectral_order=12, fdm_intervals=40, threshold=1e-3, parallel=True))
    assert np.array_equal(serial.values, parallel.values)


def test_disagreement_is_refused(bump_problem):
    level = OracleLevel(spectral_order=12, fdm_intervals=10, threshold=1e-12)
    with pytest.raises(OracleDivergenceError) as info:
        reference_solution(bump_problem, level)
    assert info.value.certificate is not None
    assert not info.value.certificate.accepted
    assert info.value.certificate.cross_eps_inf >= 1e-12


def test_uniform_problem_reference(constant_heat_problem):
    level = OracleLevel(spectral_order=8, fdm_intervals=20)
    ref, certificate = reference_solution(nondimensionalize(constant_heat_problem), level, case_cells=10)
    assert certificate.accepted
    assert certificate.cross_eps_inf < 1e-12
    assert np.allclose(ref.values, 1.0, atol=1e-12)


@pytest.mark.slow
def test_default_level_certifies_heat_case(heat_dimless):
    ref, certificate = reference_solution(heat_dimless)
    assert certificate.accepted
    assert certificate.cross_eps_inf < CROSS_TOL_LINEAR
    assert ref.values.shape == (25, 401)


def test_certificate_is_symmetric_in_the_two_discretizations(bump_problem):
    level = OracleLevel(spectral_order=12, fdm_intervals=40, threshold=1e-3)
    ref, certificate = reference_solution(bump_problem, level, samples_per_unit=10.0)
    fdm = solve_fdm(bump_problem, FdmGrid(n_cells=40), ToleranceSpec(abs_tol=1e-8, rel_tol=1e-8), 10.0,
                    integrator="stiff")
    forward = eps_inf(eps2_profile(fdm, ref))
    backward = eps_inf(eps2_profile(ref, fdm))
    assert forward == backward
    assert forward == pytest.approx(certificate.cross_eps_inf, rel=1e-12, abs=1e-15)
