"""
Shared fixtures for difftrio tests
"""
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from cases import linear_heat_problem, nonlinear_moisture_problem  # noqa: E402
from models import BoundarySignal, DiffusionProblem, HeatMaterial, nondimensionalize  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end benchmark runs")


@pytest.fixture
def heat_problem():
    return linear_heat_problem()


@pytest.fixture
def heat_dimless(heat_problem):
    return nondimensionalize(heat_problem)


@pytest.fixture
def moisture_problem():
    return nonlinear_moisture_problem()


@pytest.fixture
def moisture_dimless(moisture_problem):
    return nondimensionalize(moisture_problem)


@pytest.fixture
def constant_heat_problem():
    """境界値 = 初期値の一様な問題"""
    return DiffusionProblem(
        physics="heat",
        material=HeatMaterial(k=2.0, rho=1000.0, c=2000.0),
        L=0.1,
        left=BoundarySignal.sinusoid(20.0, [], []),
        right=BoundarySignal.sinusoid(20.0, [], []),
        initial=20.0,
        tau=6 * 3600.0,
        t_ref=3600.0,
    )
