"""
Case-study presets: linear heat slab, nonlinear moisture layer, annual wall with measured-style boundaries
"""
import logging
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from bc_data import init_linear_profile, ingest_bc_csv, signals_from_bc, synth_annual_bc
from errors import ConfigurationError
from models import BoundarySignal, DiffusionProblem, HeatMaterial, MoistureMaterial, saturation_pressure

logger = logging.getLogger(__name__)

HOUR = 3600.0
DAY = 24 * HOUR

CaseId = Literal["linear-heat", "nonlinear-moisture", "annual-wall"]


class CasePreset(BaseModel):
    """ケースごとの既定値"""
    model_config = ConfigDict(frozen=True)

    case: str
    n_cells: int = Field(ge=2)                 # FDM 格子（出力格子も兼ねる）
    spectral_order: int = Field(ge=2)
    reference: Literal["oracle", "spectral"]
    solvers: List[Dict]
    sweep_r: List[int]
    # スイープで「十分な抵抗数」とみなす ε∞ の閾値（場・流束）
    sweep_field_threshold: float = Field(default=1e-4, gt=0)
    sweep_flux_threshold: float = Field(default=1e-2, gt=0)


def _default_solvers(n_cells: int, order: int) -> List[Dict]:
    return [
        {"kind": "rc", "r": 2},
        {"kind": "rc", "r": 3},
        {"kind": "rc", "r": 100},
        {"kind": "fdm", "n_cells": n_cells},
        {"kind": "spectral", "n": order},
    ]


PRESETS: Dict[str, CasePreset] = {
    "linear-heat": CasePreset(
        case="linear-heat", n_cells=100, spectral_order=6, reference="oracle",
        solvers=_default_solvers(100, 6),
        sweep_r=[2, 3, 4, 5, 6, 8, 10, 15, 20, 25, 30, 35, 40, 45, 50, 70, 100]),
    "nonlinear-moisture": CasePreset(
        case="nonlinear-moisture", n_cells=100, spectral_order=10, reference="oracle",
        solvers=_default_solvers(100, 10),
        sweep_r=[2, 3, 5, 10, 15, 20, 30, 40, 60, 80, 90, 100, 120, 130],
        sweep_field_threshold=3e-3, sweep_flux_threshold=3e-2),
    "annual-wall": CasePreset(
        case="annual-wall", n_cells=50, spectral_order=10, reference="spectral",
        solvers=_default_solvers(50, 10),
        sweep_r=[2, 3, 5, 10, 20, 50, 100]),
}


def get_preset(case: str) -> CasePreset:
    if case not in PRESETS:
        raise ConfigurationError(f"unknown case '{case}' (expected one of {', '.join(PRESETS)})")
    return PRESETS[case]


def linear_heat_problem() -> DiffusionProblem:
    """コンクリート版 0.1 m、両側正弦波の温度、24 h"""
    t0 = 20.0
    return DiffusionProblem(
        physics="heat",
        material=HeatMaterial(k=2.0, rho=1000.0, c=2000.0),
        L=0.1,
        left=BoundarySignal.sinusoid(t0, [10.0], [24 * HOUR]),
        right=BoundarySignal.sinusoid(t0, [4.0], [3 * HOUR]),
        initial=t0,
        tau=24 * HOUR,
        t_ref=HOUR,
    )


def nonlinear_moisture_problem() -> DiffusionProblem:
    """κ(P_v) = 6.72e-13·P_v + 3e-10, ξ = 1.88e-2、相対湿度 0.5 まわりの正弦波、72 h"""
    # 境界条件は相対湿度 φ(t) として与え P_v = φ·P_sat(25 °C) に換算
    psat = float(saturation_pressure(25.0))
    p0 = 0.5 * psat
    return DiffusionProblem(
        physics="moisture",
        material=MoistureMaterial(kappa_slope=6.72e-13, kappa_intercept=3e-10, xi=1.88e-2),
        L=0.1,
        left=BoundarySignal.sinusoid(p0, [0.4 * psat], [12 * HOUR]),
        right=BoundarySignal.sinusoid(p0, [0.1 * psat], [6 * HOUR]),
        initial=p0,
        tau=72 * HOUR,
        t_ref=HOUR,
    )


def annual_wall_problem(bc_csv: Optional[str] = None, seed: int = 0, discard_days: float = 7.0,
                        max_gap_factor: float = 2.0) -> DiffusionProblem:
    """厚さ 0.5 m の壁、毎時の表面温度（CSV または合成データ）、初期条件は両端値の一次分布"""
    if bc_csv:
        left, right = ingest_bc_csv(bc_csv, discard_days, max_gap_factor)
    else:
        logger.info("[IO] no boundary CSV given, using synthetic year (seed=%d)", seed)
        left, right = signals_from_bc(synth_annual_bc(seed), discard_days)
    t_left, t_right = left.evaluate(0.0), right.evaluate(0.0)
    L = 0.5
    return DiffusionProblem(
        physics="heat",
        material=HeatMaterial(k=2.48, rho=2800.0, c=1000.0),
        L=L,
        left=left,
        right=right,
        initial=init_linear_profile(t_left, t_right, L),
        tau=min(left.end, right.end),
        t_ref=HOUR,
        reference_value=0.5 * (t_left + t_right),
    )


def build_problem(case: str, bc_csv: Optional[str] = None, seed: int = 0, discard_days: float = 7.0,
                  max_gap_factor: float = 2.0) -> DiffusionProblem:
    get_preset(case)
    if case == "linear-heat":
        return linear_heat_problem()
    if case == "nonlinear-moisture":
        return nonlinear_moisture_problem()
    return annual_wall_problem(bc_csv, seed, discard_days, max_gap_factor)
