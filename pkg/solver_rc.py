"""
RC network model: r resistances and r-1 capacitive nodes, explicit Euler in physical units
"""
import logging
import math
import time
from typing import Callable, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import ConfigurationError, ConstitutiveRangeError, StabilityError
from integrators import OdeSystem, integrate_euler
from models import (
    BoundarySignal, DiffusionProblem, HeatMaterial, MoistureMaterial, SolutionField, nondimensionalize,
)
from solver_fdm import output_times

logger = logging.getLogger(__name__)


class DtPolicy(BaseModel):
    """時間刻みの決め方（auto: CFL 上限 × cfl_fraction, fixed: dt_seconds）"""
    model_config = ConfigDict(frozen=True)

    mode: Literal["auto", "fixed"] = "auto"
    dt_seconds: Optional[float] = Field(default=None, gt=0)
    cfl_fraction: float = Field(default=0.5, gt=0, le=1.0)

    @model_validator(mode="after")
    def _check_fixed(self):
        if self.mode == "fixed" and self.dt_seconds is None:
            raise ConfigurationError("dt_policy 'fixed' needs dt_seconds")
        return self


class RcChain(BaseModel):
    """抵抗 r 個・容量節点 r−1 個の直列回路"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    physics: Literal["heat", "moisture"]
    r: int
    length: float = Field(gt=0)
    resistances: np.ndarray      # リンク抵抗 (r 個)
    capacities: np.ndarray       # 節点容量 C·Δx (r−1 個)

    @model_validator(mode="after")
    def _check_chain(self):
        if self.r < 2:
            raise ConfigurationError(f"RC chain needs r >= 2 (got {self.r})")
        if self.resistances.shape != (self.r,) or self.capacities.shape != (self.r - 1,):
            raise ConfigurationError("resistances/capacities do not match r")
        if np.any(self.resistances <= 0):
            raise ConstitutiveRangeError("RC resistances must be positive")
        if np.any(self.capacities <= 0):
            raise ConstitutiveRangeError("RC capacities must be positive")
        return self

    @property
    def dx(self) -> float:
        return self.length / self.r

    @property
    def nodes(self) -> np.ndarray:
        """端点を含む節点位置 [m]"""
        return np.linspace(0.0, self.length, self.r + 1)

    @property
    def total_resistance(self) -> float:
        return float(np.sum(self.resistances))


def build_chain_heat(m: HeatMaterial, L: float, r: int) -> RcChain:
    """R = (L/r)/k, 容量 ρc·(L/r)"""
    if r < 2:
        raise ConfigurationError(f"RC chain needs r >= 2 (got {r})")
    dx = L / r
    return RcChain(physics="heat", r=r, length=L,
                   resistances=np.full(r, dx / m.k),
                   capacities=np.full(r - 1, m.volumetric_capacity * dx))


def _moisture_links(m: MoistureMaterial, dx: float, full: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """全節点の圧力からリンク抵抗 R_j + R_{j+1} と節点容量 ξ(P_j)·Δx を計算"""
    kappa = m.kappa(full)
    if np.any(kappa <= 0):
        bad = int(np.flatnonzero(kappa <= 0)[0])
        raise ConstitutiveRangeError(
            f"kappa not positive at RC node {bad} (P={full[bad]:.6g} Pa)", location=bad * dx)
    half = dx / (2.0 * kappa)
    caps = m.capacity(full[1:-1]) * dx
    if np.any(caps <= 0):
        bad = int(np.flatnonzero(caps <= 0)[0]) + 1
        raise ConstitutiveRangeError(
            f"xi not positive at RC node {bad} (P={full[bad]:.6g} Pa)", location=bad * dx)
    return half[:-1] + half[1:], caps


def build_chain_moisture(m: MoistureMaterial, L: float, r: int, state) -> RcChain:
    """状態依存の抵抗 R_j = Δx/(2κ(P_j))（state は境界を含む r+1 点の圧力）"""
    if r < 2:
        raise ConfigurationError(f"RC chain needs r >= 2 (got {r})")
    full = np.asarray(state, dtype=float)
    if full.shape != (r + 1,):
        raise ConfigurationError(f"moisture chain state needs {r + 1} nodal pressures")
    links, caps = _moisture_links(m, L / r, full)
    return RcChain(physics="moisture", r=r, length=L, resistances=links, capacities=caps)


def _with_ends(state: np.ndarray, left: float, right: float) -> np.ndarray:
    full = np.empty(state.size + 2)
    full[0] = left
    full[1:-1] = state
    full[-1] = right
    return full


def rhs_rc_heat(chain: RcChain, state: np.ndarray, t_left: float, t_right: float) -> np.ndarray:
    """C·Δx·dT_j/dt = (T_{j+1} − T_j)/R − (T_j − T_{j−1})/R"""
    q = np.diff(_with_ends(state, t_left, t_right)) / chain.resistances
    return (q[1:] - q[:-1]) / chain.capacities


def rhs_rc_moisture(m: MoistureMaterial, dx: float, state: np.ndarray, p_left: float, p_right: float) -> np.ndarray:
    """各ステップで抵抗を更新する湿気 RC 回路の右辺"""
    full = _with_ends(state, p_left, p_right)
    links, caps = _moisture_links(m, dx, full)
    g = np.diff(full) / links
    return (g[1:] - g[:-1]) / caps


def cfl_max_step(fo: float, dx_star: float) -> float:
    """陽的 Euler の安定条件 Δt* ≤ Δx*²/(2·Fo)"""
    return dx_star ** 2 / (2.0 * fo)


def pressure_range(p: DiffusionProblem) -> Tuple[float, float]:
    """境界信号と初期値から見積もった圧力範囲"""
    lo_l, hi_l = p.left.bounds()
    lo_r, hi_r = p.right.bounds()
    init = p.initial_profile(np.linspace(0.0, p.L, 101))
    return min(lo_l, lo_r, float(init.min())), max(hi_l, hi_r, float(init.max()))


def stable_step(p: DiffusionProblem, r: int) -> float:
    """物理時間での安定刻み上限 [s]"""
    if p.physics == "heat":
        return cfl_max_step(nondimensionalize(p).fo, 1.0 / r) * p.t_ref
    m = p.material
    dx = p.L / r
    lo, hi = pressure_range(p)
    m.check_range(lo, hi)
    # κ はアフィン関数、ξ は区分線形なので端点と表の節点で評価すれば十分
    points = np.array([lo, hi])
    if m.xi_table is not None:
        table_p = np.asarray([row[0] for row in m.xi_table])
        points = np.concatenate([points, table_p[(table_p > lo) & (table_p < hi)]])
    kappa_max = float(np.max(m.kappa(points)))
    xi_min = float(np.min(m.capacity(points)))
    return xi_min * dx ** 2 / (2.0 * kappa_max)


def resolve_dt(p: DiffusionProblem, r: int, dt_policy: DtPolicy) -> float:
    limit = stable_step(p, r)
    if dt_policy.mode == "auto":
        return dt_policy.cfl_fraction * limit
    if dt_policy.dt_seconds > limit:
        raise StabilityError(
            f"dt={dt_policy.dt_seconds:.6g} s exceeds the stability limit {limit:.6g} s for r={r}")
    return dt_policy.dt_seconds


def tabulated_boundary(signal: BoundarySignal, dt: float, t_end: float) -> Callable[[float], float]:
    """刻み時刻 m·dt（最後は t_end）で事前評価した境界値。刻み外の時刻は evaluate に戻す"""
    n = int(math.ceil(t_end / dt - 1e-9))
    values = signal.evaluate(np.minimum(dt * np.arange(n + 1), t_end))

    def at(t: float) -> float:
        m = int(round(t / dt))
        if 0 <= m <= n and abs(t - min(m * dt, t_end)) <= 1e-9 * dt:
            return values[m]
        return signal.evaluate(t)

    return at


def rc_system(p: DiffusionProblem, r: int, dt: Optional[float] = None) -> OdeSystem:
    """RC 回路の ODE 系（物理単位, 内部節点のみ）。dt を渡すと境界値を刻み時刻で事前評価する"""
    if dt is None:
        left, right = p.left.evaluate, p.right.evaluate
    else:
        left, right = tabulated_boundary(p.left, dt, p.tau), tabulated_boundary(p.right, dt, p.tau)
    if p.physics == "heat":
        chain = build_chain_heat(p.material, p.L, r)

        def rhs(t, state):
            return rhs_rc_heat(chain, state, left(t), right(t))
    else:
        m = p.material
        dx = p.L / r

        def rhs(t, state):
            return rhs_rc_moisture(m, dx, state, left(t), right(t))

    return OdeSystem(dimension=r - 1, rhs=rhs, jacobian_policy="none")


def solve_rc(p: DiffusionProblem, r: int, dt_policy: Optional[DtPolicy] = None,
             samples_per_unit: float = 1.0, solver_id: Optional[str] = None) -> SolutionField:
    """RC モデルを陽的 Euler で解く（物理単位の解を返す）"""
    if r < 2:
        raise ConfigurationError(f"RC chain needs r >= 2 (got {r})")
    dt_policy = dt_policy or DtPolicy()
    dt = resolve_dt(p, r, dt_policy)
    x = np.linspace(0.0, p.L, r + 1)
    t_out = output_times(nondimensionalize(p), samples_per_unit) * p.t_ref
    t_out[-1] = p.tau

    started = time.perf_counter()
    system = rc_system(p, r, dt)
    traj = integrate_euler(system, 0.0, p.tau, dt, p.initial_profile(x[1:-1]), t_out)
    cpu = time.perf_counter() - started

    values = np.empty((t_out.size, r + 1))
    values[:, 1:-1] = traj.states
    values[:, 0] = p.left.evaluate(t_out)
    values[:, -1] = p.right.evaluate(t_out)
    logger.info("[RC] r=%d dt=%.4g s steps=%d cpu=%.3fs", r, dt, traj.n_accepted, cpu)
    return SolutionField(x_nodes=x, t_samples=t_out, values=values,
                         solver_id=solver_id or f"R{r}C", cpu_seconds=cpu, units="physical")
