"""
Error metrics, boundary flux, conduction loads and temporal aggregation
"""
import logging
import math
from typing import Callable, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.integrate import trapezoid

from errors import ContractError, LocationError, OutOfRangeError, UndefinedScdError
from models import DiffusionProblem, HeatMaterial, SolutionField
from solver_spectral import cheb_eval, first_derivative_matrix, reconstruct

logger = logging.getLogger(__name__)

SCD_CAP = 16.0
SECONDS_PER_HOUR = 3600.0
PERIODS = {"daily": 24 * 3600.0, "monthly": 30 * 24 * 3600.0}


def _readonly(v) -> np.ndarray:
    arr = np.array(v, dtype=float)
    arr.setflags(write=False)
    return arr


class FluxSeries(BaseModel):
    """位置 x0 での流束密度の時系列"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t_samples: np.ndarray
    q: np.ndarray
    location: float

    @field_validator("t_samples", "q", mode="before")
    @classmethod
    def _as_array(cls, v):
        return _readonly(v)

    @model_validator(mode="after")
    def _check(self):
        if self.q.shape != self.t_samples.shape:
            raise ContractError("flux series and time samples differ in length")
        return self

    def scaled(self, factor: float, time_factor: float = 1.0) -> "FluxSeries":
        return FluxSeries(t_samples=self.t_samples * time_factor, q=self.q * factor, location=self.location)


class WindowSeries(BaseModel):
    """固定長ウィンドウごとの集計値"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    starts: np.ndarray
    ends: np.ndarray
    values: np.ndarray


class ErrorReport(BaseModel):
    """1 ソルバー分の誤差指標"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    solver_id: str
    x_nodes: Optional[np.ndarray] = None   # ε₂ を評価した節点（無次元）
    eps2_profile: np.ndarray
    eps_inf: float
    flux_eps_inf: float
    flux_eps_inf_dimensional: float
    scd: float
    r_cpu_ms_per_h: float
    cpu_seconds: float
    max_abs_deviation: float = math.nan   # 物理単位での最大偏差（参照解の節点上）

    @model_validator(mode="after")
    def _check(self):
        if self.eps2_profile.size and not math.isclose(self.eps_inf, float(np.max(self.eps2_profile))):
            raise ContractError("eps_inf must equal the maximum of the eps2 profile")
        return self


def resample(field: SolutionField, x_nodes) -> SolutionField:
    """空間方向の再サンプリング（Chebyshev 係数があれば厳密評価、なければ線形補間）"""
    x = np.asarray(x_nodes, dtype=float)
    if x.size == field.x_nodes.size and np.allclose(x, field.x_nodes, rtol=0, atol=1e-12):
        return field
    length = float(field.x_nodes[-1])
    if x[0] < field.x_nodes[0] - 1e-12 * length or x[-1] > length * (1 + 1e-12):
        raise ContractError("resample nodes outside the field's span")
    if field.coeffs is not None:
        values = reconstruct(field.coeffs, x / length)
    else:
        values = np.array([np.interp(x, field.x_nodes, row) for row in field.values])
    return SolutionField(x_nodes=x, t_samples=field.t_samples, values=values, solver_id=field.solver_id,
                         cpu_seconds=field.cpu_seconds, units=field.units, coeffs=field.coeffs)


def _check_lattice(sol: SolutionField, ref: SolutionField) -> None:
    if sol.values.shape != ref.values.shape:
        raise ContractError(f"grid mismatch: {sol.values.shape} vs {ref.values.shape}")
    if not np.allclose(sol.x_nodes, ref.x_nodes, rtol=1e-9, atol=1e-12):
        raise ContractError("x grids differ")
    if not np.allclose(sol.t_samples, ref.t_samples, rtol=1e-9, atol=1e-9):
        raise ContractError("time grids differ")


def eps2_profile(sol: SolutionField, ref: SolutionField) -> np.ndarray:
    """ε₂(x) = √((1/N_t) Σ (u − u_ref)²)"""
    _check_lattice(sol, ref)
    diff = sol.values - ref.values
    return np.sqrt(np.mean(diff * diff, axis=0))


def eps_inf(profile) -> float:
    return float(np.max(np.asarray(profile, dtype=float)))


def scd(sol: SolutionField, ref: SolutionField) -> float:
    """最終時刻の分布で −log10 ‖(u − u_ref)/u_ref‖∞（上限 16）"""
    _check_lattice(sol, ref)
    u, u_ref = sol.final_profile, ref.final_profile
    if np.any(u_ref == 0):
        raise UndefinedScdError("reference profile vanishes at a node; scd undefined")
    rel = float(np.max(np.abs((u - u_ref) / u_ref)))
    if rel == 0.0:
        return SCD_CAP
    return min(SCD_CAP, -math.log10(rel))


def _node_index(x_nodes: np.ndarray, x0: float) -> int:
    idx = int(np.argmin(np.abs(x_nodes - x0)))
    if not math.isclose(x_nodes[idx], x0, rel_tol=0, abs_tol=1e-9 * max(1.0, float(x_nodes[-1]))):
        raise LocationError(f"flux location {x0} is not a grid node")
    return idx


def flux(sol: SolutionField, method_hint: Literal["fdm", "rc", "spectral"], conductivity: Callable,
         x0: float) -> FluxSeries:
    """q = −k(u)·∂u/∂x at x0（格子法は片側差分、スペクトル法は係数の厳密微分）"""
    x = sol.x_nodes
    if method_hint == "spectral":
        if sol.coeffs is None:
            raise ContractError("spectral flux needs Chebyshev coefficients")
        length = float(x[-1])
        if x0 < -1e-12 * length or x0 > length * (1 + 1e-12):
            raise LocationError(f"flux location {x0} outside [0, {length}]")
        X0 = min(1.0, max(-1.0, 2.0 * x0 / length - 1.0))
        n = sol.coeffs.shape[1] - 1
        d1 = sol.coeffs @ first_derivative_matrix(n).T
        value = np.array([cheb_eval(row, X0) for row in sol.coeffs])
        grad = np.array([cheb_eval(row, X0) for row in d1]) * (2.0 / length)
        return FluxSeries(t_samples=sol.t_samples, q=-conductivity(value) * grad, location=x0)

    j = _node_index(x, x0)
    i, k = (j - 1, j) if j > 0 else (0, 1)
    u_i, u_k = sol.values[:, i], sol.values[:, k]
    if method_hint == "rc":
        # 2 つの半抵抗の直列 → κ の調和平均
        k_i, k_k = conductivity(u_i), conductivity(u_k)
        cond = 2.0 * k_i * k_k / (k_i + k_k)
    else:
        cond = conductivity(0.5 * (u_i + u_k))
    q = -cond * (u_k - u_i) / (x[k] - x[i])
    return FluxSeries(t_samples=sol.t_samples, q=q, location=x0)


def flux_eps_inf(q: FluxSeries, q_ref: FluxSeries) -> float:
    """流束誤差（時間方向の RMS）"""
    if q.q.shape != q_ref.q.shape:
        raise ContractError("flux series lengths differ")
    d = q.q - q_ref.q
    return float(np.sqrt(np.mean(d * d)))


def flux_scale(p: DiffusionProblem) -> float:
    """無次元流束 → 物理流束の係数 k°·scale/L"""
    m = p.material
    k_ref = m.k if isinstance(m, HeatMaterial) else float(m.kappa(p.scale))
    return k_ref * p.scale / p.L


def r_cpu(cpu_seconds: float, tau_seconds: float) -> float:
    """計算時間 [ms] / 物理時間 [h]"""
    return 1000.0 * cpu_seconds / (tau_seconds / SECONDS_PER_HOUR)


def conduction_load(q: FluxSeries, t1: float, t2: float) -> float:
    """E = ∫_{t1}^{t2} q dt（台形則、端点は線形補間）"""
    t = q.t_samples
    slack = 1e-9 * max(1.0, abs(float(t[-1])))
    if not t1 < t2:
        raise OutOfRangeError(f"load interval must satisfy t1 < t2 (got {t1}, {t2})")
    if t1 < t[0] - slack or t2 > t[-1] + slack:
        raise OutOfRangeError(f"load interval [{t1}, {t2}] outside series [{t[0]}, {t[-1]}]")
    t1, t2 = max(t1, float(t[0])), min(t2, float(t[-1]))
    inside = (t > t1) & (t < t2)
    tt = np.concatenate([[t1], t[inside], [t2]])
    qq = np.concatenate([[np.interp(t1, t, q.q)], q.q[inside], [np.interp(t2, t, q.q)]])
    return float(trapezoid(qq, tt))


def _windows(t: np.ndarray, period: float):
    start, end = float(t[0]), float(t[-1])
    count = max(1, int(math.ceil((end - start) / period - 1e-9)))
    lo = start + period * np.arange(count)
    hi = np.minimum(lo + period, end)
    return lo, hi


def _period_seconds(period) -> float:
    if isinstance(period, str):
        if period not in PERIODS:
            raise ContractError(f"unknown aggregation period '{period}'")
        return PERIODS[period]
    return float(period)


def daily_loads(q: FluxSeries, period="daily") -> WindowSeries:
    """連続するウィンドウごとの伝導負荷"""
    lo, hi = _windows(q.t_samples, _period_seconds(period))
    loads = [conduction_load(q, a, b) for a, b in zip(lo, hi)]
    return WindowSeries(starts=lo, ends=hi, values=np.asarray(loads))


def aggregate(t_samples, values, period="daily") -> WindowSeries:
    """固定長ウィンドウ（24 h / 30 d）ごとの平均。最後のウィンドウは終端サンプルを含む"""
    t = np.asarray(t_samples, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size != v.size or t.size == 0:
        raise ContractError("aggregate needs matching non-empty series")
    if t.size > 2:
        dt = np.diff(t)
        if not np.allclose(dt, dt[0], rtol=1e-9):
            raise ContractError("aggregate needs uniform sampling")
    lo, hi = _windows(t, _period_seconds(period))
    means: List[float] = []
    for k, (a, b) in enumerate(zip(lo, hi)):
        last = k == lo.size - 1
        mask = (t >= a) & ((t <= b) if last else (t < b))
        if not np.any(mask):
            raise OutOfRangeError(f"empty aggregation window [{a}, {b})")
        means.append(float(np.mean(v[mask])))
    return WindowSeries(starts=lo, ends=hi, values=np.asarray(means))


def flux_location(spec, length: float) -> float:
    """'left' / 'right' / 位置 [m] → x [m]"""
    if spec == "left":
        return 0.0
    if spec == "right":
        return length
    x0 = float(spec)
    if not 0.0 <= x0 <= length:
        raise LocationError(f"flux location {x0} m outside the wall [0, {length}]")
    return x0


def error_report(sol: SolutionField, ref: SolutionField, p: DiffusionProblem, conductivity: Callable,
                 method_hint: Literal["fdm", "rc", "spectral"], x0_star: float = 1.0,
                 ref_flux: Optional[FluxSeries] = None, x_nodes=None) -> ErrorReport:
    """無次元の解と参照解から ε₂, ε∞, 流束誤差, scd, R_cpu をまとめる

    既定では解自身の節点で採点する（参照解は Chebyshev 係数から厳密評価）。
    x_nodes を渡すと両方をその格子へ再サンプリングする。
    """
    nodes = sol.x_nodes if x_nodes is None else np.asarray(x_nodes, dtype=float)
    sol_c = resample(sol, nodes)
    ref_c = resample(ref, nodes)
    profile = eps2_profile(sol_c, ref_c)
    try:
        digits = scd(sol_c, ref_c)
    except UndefinedScdError as e:
        logger.warning("[BENCH] %s: %s", sol.solver_id, e.detail)
        digits = math.nan
    q = flux(sol, method_hint, conductivity, x0_star)
    q_ref = ref_flux or flux(ref, "spectral" if ref.coeffs is not None else "fdm", conductivity, x0_star)
    flux_err = flux_eps_inf(q, q_ref)
    # 温度偏差は壁全体（参照解の節点、解は節点間を線形補間）で見る
    wall = resample(sol, ref.x_nodes)
    return ErrorReport(
        solver_id=sol.solver_id,
        x_nodes=sol_c.x_nodes,
        eps2_profile=profile,
        eps_inf=eps_inf(profile),
        flux_eps_inf=flux_err,
        flux_eps_inf_dimensional=flux_err * flux_scale(p),
        scd=digits,
        r_cpu_ms_per_h=r_cpu(sol.cpu_seconds, p.tau),
        cpu_seconds=sol.cpu_seconds,
        max_abs_deviation=float(np.max(np.abs(wall.values - ref.values))) * p.scale,
    )
