"""
Central finite-difference (method of lines) solver for linear heat and nonlinear moisture diffusion
"""
import logging
import time
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import ConstitutiveRangeError
from integrators import OdeSystem, ToleranceSpec, integrate_adaptive_rk, integrate_stiff
from models import DimensionlessProblem, SolutionField

logger = logging.getLogger(__name__)


class FdmGrid(BaseModel):
    """一様格子（無次元 x* ∈ [0, 1]）"""
    model_config = ConfigDict(frozen=True)

    n_cells: int = Field(ge=2)

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        """境界を含む全節点 x_0 … x_N"""
        return np.linspace(0.0, 1.0, self.n_cells + 1)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


def rhs_linear_heat(state: np.ndarray, fo: float, grid: FdmGrid, u_left: float, u_right: float) -> np.ndarray:
    """du_j/dt = Fo·(u_{j-1} − 2u_j + u_{j+1})/Δx²"""
    full = np.empty(state.size + 2)
    full[0] = u_left
    full[1:-1] = state
    full[-1] = u_right
    return fo * (full[:-2] - 2.0 * full[1:-1] + full[2:]) / grid.dx ** 2


def rhs_nonlinear_moisture(state: np.ndarray, fo: float, grid: FdmGrid, kappa_star, xi_star,
                           v_left: float, v_right: float) -> np.ndarray:
    """ξ*(v_j)·dv_j/dt = Fo·[κ*(v_{j+½})(v_{j+1} − v_j) − κ*(v_{j−½})(v_j − v_{j−1})]/Δx²"""
    full = np.empty(state.size + 2)
    full[0] = v_left
    full[1:-1] = state
    full[-1] = v_right
    # 半節点の κ* は隣接節点の算術平均で評価
    k_half = kappa_star(0.5 * (full[:-1] + full[1:]))
    if np.any(k_half <= 0):
        bad = int(np.flatnonzero(k_half <= 0)[0])
        raise ConstitutiveRangeError(
            f"kappa* not positive between nodes {bad} and {bad + 1}", location=(bad + 0.5) * grid.dx)
    flux = k_half * np.diff(full)
    xi = xi_star(state)
    if np.any(xi <= 0):
        bad = int(np.flatnonzero(xi <= 0)[0])
        raise ConstitutiveRangeError(
            f"xi* not positive at node {bad + 1} (v={state[bad]:.6g})", location=float(grid.interior[bad]))
    return fo * (flux[1:] - flux[:-1]) / (grid.dx ** 2 * xi)


def build_system(p: DimensionlessProblem, grid: FdmGrid) -> OdeSystem:
    """内部節点の ODE 系（境界値は評価ごとに注入）"""
    fo = p.fo
    left, right = p.left, p.right
    if p.physics == "heat":
        inv = fo / grid.dx ** 2
        n = grid.n_cells - 1
        jac = inv * (np.diag(np.full(n - 1, 1.0), -1) - 2.0 * np.eye(n) + np.diag(np.full(n - 1, 1.0), 1))

        def rhs(t, u):
            return rhs_linear_heat(u, fo, grid, left.evaluate(t), right.evaluate(t))

        return OdeSystem(dimension=n, rhs=rhs, jacobian=lambda t, u: jac)

    kappa_star, xi_star = p.kappa_star, p.xi_star

    def rhs(t, v):
        return rhs_nonlinear_moisture(v, fo, grid, kappa_star, xi_star, left.evaluate(t), right.evaluate(t))

    return OdeSystem(dimension=grid.n_cells - 1, rhs=rhs)


def output_times(p: DimensionlessProblem, samples_per_unit: float = 1.0) -> np.ndarray:
    """共通の出力時刻（等間隔、t* = 0 と τ* を含む）"""
    n = max(1, int(round(p.tau_star * samples_per_unit)))
    return np.linspace(0.0, p.tau_star, n + 1)


def solve_fdm(p: DimensionlessProblem, grid: FdmGrid, tol: Optional[ToleranceSpec] = None,
              samples_per_unit: float = 1.0, integrator: Literal["rk", "stiff"] = "rk",
              solver_id: str = "FDM") -> SolutionField:
    """中心差分 + 適応 Runge-Kutta（ode45 相当）"""
    tol = tol or ToleranceSpec()
    t_out = output_times(p, samples_per_unit)
    system = build_system(p, grid)
    u0 = p.initial_profile(grid.interior)
    p.check_state(u0, " in initial state")

    started = time.perf_counter()
    if integrator == "stiff":
        traj = integrate_stiff(system, 0.0, p.tau_star, u0, tol, t_out)
    else:
        traj = integrate_adaptive_rk(system, 0.0, p.tau_star, u0, tol, t_out)
    cpu = time.perf_counter() - started

    values = np.empty((t_out.size, grid.n_cells + 1))
    values[:, 1:-1] = traj.states
    values[:, 0] = p.left.evaluate(t_out)
    values[:, -1] = p.right.evaluate(t_out)
    logger.info("[FDM] N=%d integrator=%s steps=%d rejected=%d cpu=%.3fs",
                grid.n_cells, integrator, traj.n_accepted, traj.n_rejected, cpu)
    return SolutionField(x_nodes=grid.nodes, t_samples=t_out, values=values,
                         solver_id=solver_id, cpu_seconds=cpu)
