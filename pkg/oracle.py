"""
Reference solutions certified by agreement of two independent discretizations
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from errors import OracleDivergenceError
from integrators import ToleranceSpec
from metrics import eps2_profile, eps_inf, resample
from models import DimensionlessProblem, SolutionField
from solver_fdm import FdmGrid, solve_fdm
from solver_spectral import solve_spectral

logger = logging.getLogger(__name__)

# 受理しきい値（線形 / 非線形）
CROSS_TOL_LINEAR = 1e-6
CROSS_TOL_NONLINEAR = 1e-5


class OracleLevel(BaseModel):
    """参照解の解像度と許容誤差"""
    model_config = ConfigDict(frozen=True)

    spectral_order: Optional[int] = Field(default=None, ge=2)   # None → 24（線形）/ 32（非線形）
    fdm_intervals: Optional[int] = Field(default=None, ge=2)    # None → ケース格子の 4 倍
    spectral_tol: float = Field(default=1e-10, gt=0)
    fdm_tol: float = Field(default=1e-8, gt=0)
    threshold: Optional[float] = Field(default=None, gt=0)
    parallel: bool = False

    def order_for(self, physics: str) -> int:
        if self.spectral_order is not None:
            return self.spectral_order
        return 24 if physics == "heat" else 32

    def intervals_for(self, case_cells: int) -> int:
        return self.fdm_intervals or 4 * case_cells

    def threshold_for(self, physics: str) -> float:
        if self.threshold is not None:
            return self.threshold
        return CROSS_TOL_LINEAR if physics == "heat" else CROSS_TOL_NONLINEAR


class OracleCertificate(BaseModel):
    """2 手法の相互検証結果"""
    physics: str
    spectral_order: int
    spectral_tol: float
    fdm_intervals: int
    fdm_tol: float
    cross_eps_inf: float
    threshold: float
    accepted: bool
    spectral_cpu_seconds: float
    fdm_cpu_seconds: float


def reference_solution(p: DimensionlessProblem, level: Optional[OracleLevel] = None,
                       samples_per_unit: float = 1.0, case_cells: int = 100) -> Tuple[SolutionField, OracleCertificate]:
    """高次スペクトル解と細格子 FDM 解を比較し、一致すればスペクトル解を参照解として返す"""
    level = level or OracleLevel()
    n = level.order_for(p.physics)
    intervals = level.intervals_for(case_cells)
    grid = FdmGrid(n_cells=intervals)
    spectral_tol = ToleranceSpec(abs_tol=level.spectral_tol, rel_tol=level.spectral_tol)
    fdm_tol = ToleranceSpec(abs_tol=level.fdm_tol, rel_tol=level.fdm_tol)

    def run_spectral():
        return solve_spectral(p, n, spectral_tol, samples_per_unit, integrator="stiff",
                              x_nodes=grid.nodes, solver_id="Reference")

    def run_fdm():
        return solve_fdm(p, grid, fdm_tol, samples_per_unit, integrator="stiff",
                         solver_id=f"FDM{intervals}")

    logger.info("[ORACLE] spectral n=%d tol=%.0e / FDM N=%d tol=%.0e",
                n, level.spectral_tol, intervals, level.fdm_tol)
    if level.parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            spectral_future = pool.submit(run_spectral)
            fdm_future = pool.submit(run_fdm)
            spectral, fdm = spectral_future.result(), fdm_future.result()
    else:
        spectral, fdm = run_spectral(), run_fdm()

    cross = eps_inf(eps2_profile(fdm, resample(spectral, fdm.x_nodes)))
    threshold = level.threshold_for(p.physics)
    certificate = OracleCertificate(
        physics=p.physics,
        spectral_order=n,
        spectral_tol=level.spectral_tol,
        fdm_intervals=intervals,
        fdm_tol=level.fdm_tol,
        cross_eps_inf=cross,
        threshold=threshold,
        accepted=cross < threshold,
        spectral_cpu_seconds=spectral.cpu_seconds,
        fdm_cpu_seconds=fdm.cpu_seconds,
    )
    if not certificate.accepted:
        logger.error("[ORACLE] cross eps_inf %.3e exceeds %.0e, reference refused", cross, threshold)
        raise OracleDivergenceError(
            f"reference not certified: cross eps_inf {cross:.3e} >= {threshold:.0e}", certificate=certificate)
    logger.info("[ORACLE] certified: cross eps_inf %.3e < %.0e", cross, threshold)
    return spectral, certificate
