"""
Domain models for difftrio: materials, boundary signals, diffusion problems and solution fields
"""
import math
from functools import partial
from typing import Callable, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from errors import ConstitutiveRangeError, ContractError, InvalidProblemError, OutOfRangeError

# 飽和水蒸気圧の近似式（T は °C, 結果は Pa）
PSAT_A = 611.21
PSAT_B = 17.502
PSAT_C = 240.97

ABSOLUTE_ZERO_C = -273.15


def saturation_pressure(t_celsius):
    """飽和水蒸気圧 P_sat(T) [Pa]"""
    return PSAT_A * np.exp(PSAT_B * np.asarray(t_celsius, dtype=float) / (PSAT_C + np.asarray(t_celsius, dtype=float)))


def _horizon_slack(end: float) -> float:
    return 1e-9 * max(1.0, abs(end))


class HeatMaterial(BaseModel):
    """熱物性（単層壁）"""
    model_config = ConfigDict(frozen=True)

    k: float = Field(gt=0)      # 熱伝導率 [W/(m·K)]
    rho: float = Field(gt=0)    # 密度 [kg/m³]
    c: float = Field(gt=0)      # 比熱 [J/(kg·K)]

    @property
    def volumetric_capacity(self) -> float:
        return self.rho * self.c

    def conductivity(self, values):
        return np.full(np.shape(values), self.k, dtype=float)

    def capacity(self, values):
        return np.full(np.shape(values), self.volumetric_capacity, dtype=float)


class MoistureMaterial(BaseModel):
    """透湿率 κ(P_v) = κ1·P_v + κ0 と湿気容量 ξ(P_v)"""
    model_config = ConfigDict(frozen=True)

    kappa_slope: float                              # κ1 [s/Pa]
    kappa_intercept: float = Field(gt=0)            # κ0 [s]
    xi: Optional[float] = Field(default=None, gt=0)  # 定数 ξ [s²/m²]
    xi_table: Optional[List[Tuple[float, float]]] = None  # (P_v, ξ) の表

    _xi_p: Optional[np.ndarray] = PrivateAttr(default=None)
    _xi_v: Optional[np.ndarray] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_capacity(self):
        if (self.xi is None) == (self.xi_table is None):
            raise InvalidProblemError("exactly one of xi / xi_table must be given")
        if self.xi_table is not None:
            table = np.asarray(self.xi_table, dtype=float)
            if table.ndim != 2 or table.shape[0] < 2:
                raise InvalidProblemError("xi_table needs at least two (P_v, xi) rows")
            if np.any(np.diff(table[:, 0]) <= 0):
                raise InvalidProblemError("xi_table pressures must be strictly increasing")
            if np.any(table[:, 1] <= 0):
                raise InvalidProblemError("xi_table values must be positive")
            self._xi_p = table[:, 0].copy()
            self._xi_v = table[:, 1].copy()
        return self

    def kappa(self, p):
        return self.kappa_slope * np.asarray(p, dtype=float) + self.kappa_intercept

    def dkappa(self, p):
        return np.full(np.shape(p), self.kappa_slope, dtype=float)

    def capacity(self, p):
        if self._xi_p is None:
            return np.full(np.shape(p), self.xi, dtype=float)
        return np.interp(p, self._xi_p, self._xi_v)

    def conductivity(self, p):
        return self.kappa(p)

    def check_range(self, p_min: float, p_max: float) -> None:
        """圧力範囲 [p_min, p_max] で κ > 0, ξ > 0 を確認"""
        ends = np.array([p_min, p_max], dtype=float)
        # κ はアフィン関数なので端点で十分
        if np.any(self.kappa(ends) <= 0):
            raise ConstitutiveRangeError(
                f"kappa not positive over [{p_min:.6g}, {p_max:.6g}] Pa", location=None)
        if np.any(self.capacity(ends) <= 0):
            raise ConstitutiveRangeError(
                f"xi not positive over [{p_min:.6g}, {p_max:.6g}] Pa", location=None)


class BoundarySignal(BaseModel):
    """Dirichlet 境界条件の時系列（解析的な正弦波 or 計測サンプル）"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["sinusoid", "sampled"]
    mean: float = 0.0
    amplitudes: List[float] = Field(default_factory=list)
    periods: List[float] = Field(default_factory=list)   # [s]
    phases: List[float] = Field(default_factory=list)    # [rad]
    times: List[float] = Field(default_factory=list)     # [s]
    values: List[float] = Field(default_factory=list)
    horizon: Optional[float] = None

    _t: np.ndarray = PrivateAttr()
    _v: np.ndarray = PrivateAttr()
    _omega: np.ndarray = PrivateAttr()
    _amp: np.ndarray = PrivateAttr()
    _phase: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def _check_shape(self):
        if self.kind == "sinusoid":
            if len(self.amplitudes) != len(self.periods):
                raise InvalidProblemError("amplitudes and periods must have the same length")
            if any(p <= 0 for p in self.periods):
                raise InvalidProblemError("sinusoid periods must be positive")
            phases = list(self.phases) or [0.0] * len(self.periods)
            if len(phases) != len(self.periods):
                raise InvalidProblemError("phases must match periods")
            self._omega = 2.0 * math.pi / np.asarray(self.periods, dtype=float)
            self._amp = np.asarray(self.amplitudes, dtype=float)
            self._phase = np.asarray(phases, dtype=float)
        else:
            if len(self.times) != len(self.values) or len(self.times) < 2:
                raise InvalidProblemError("sampled signal needs at least two (time, value) pairs")
            t = np.asarray(self.times, dtype=float)
            if np.any(np.diff(t) <= 0):
                raise InvalidProblemError("sampled times must be strictly increasing")
            self._t = t
            self._v = np.asarray(self.values, dtype=float)
        return self

    @classmethod
    def sinusoid(cls, mean: float, amplitudes, periods, phases=None, horizon=None) -> "BoundarySignal":
        return cls(kind="sinusoid", mean=mean, amplitudes=list(amplitudes), periods=list(periods),
                   phases=list(phases or []), horizon=horizon)

    @classmethod
    def sampled(cls, times, values, horizon=None) -> "BoundarySignal":
        return cls(kind="sampled", times=[float(v) for v in times],
                   values=[float(v) for v in values], horizon=horizon)

    @property
    def start(self) -> float:
        return 0.0 if self.kind == "sinusoid" else float(self._t[0])

    @property
    def end(self) -> float:
        if self.kind == "sampled":
            end = float(self._t[-1])
            return end if self.horizon is None else min(end, self.horizon)
        return math.inf if self.horizon is None else self.horizon

    def evaluate(self, t):
        """時刻 t [s]（スカラー or 配列）での境界値"""
        lo, hi = self.start, self.end
        if np.ndim(t) == 0:
            tf = float(t)
            if tf < lo - _horizon_slack(lo) or tf > hi + _horizon_slack(hi):
                raise OutOfRangeError(f"t={tf} outside signal horizon [{lo}, {hi}]")
            if self.kind == "sampled":
                return float(np.interp(tf, self._t, self._v))
            acc = self.mean
            for a, w, ph in zip(self._amp, self._omega, self._phase):
                acc += a * math.sin(w * tf + ph)
            return acc
        tt = np.asarray(t, dtype=float)
        if np.any(tt < lo - _horizon_slack(lo)) or np.any(tt > hi + _horizon_slack(hi)):
            raise OutOfRangeError(f"t outside signal horizon [{lo}, {hi}]")
        if self.kind == "sinusoid":
            return self.mean + np.sin(np.multiply.outer(tt, self._omega) + self._phase) @ self._amp
        return np.interp(tt, self._t, self._v)

    def bounds(self) -> Tuple[float, float]:
        """ホライズン内での (最小値, 最大値) の上界・下界"""
        if self.kind == "sinusoid":
            spread = float(np.sum(np.abs(self._amp)))
            return self.mean - spread, self.mean + spread
        return float(np.min(self._v)), float(np.max(self._v))

    def scaled(self, value_scale: float, time_scale: float) -> "BoundarySignal":
        """値を value_scale, 時刻を time_scale で割った信号"""
        horizon = None if self.horizon is None else self.horizon / time_scale
        if self.kind == "sinusoid":
            return BoundarySignal.sinusoid(
                self.mean / value_scale,
                [a / value_scale for a in self.amplitudes],
                [p / time_scale for p in self.periods],
                list(self._phase), horizon=horizon)
        return BoundarySignal.sampled(self._t / time_scale, self._v / value_scale, horizon=horizon)


def sample_boundary(b: BoundarySignal, t):
    """境界信号のサンプリング（正弦波は厳密値、計測値は線形補間）"""
    return b.evaluate(t)


Initial = Union[float, Callable]


def _scaled_profile(profile, length: float, scale: float, x_star):
    return np.asarray(profile(np.asarray(x_star, dtype=float) * length), dtype=float) / scale


class DiffusionProblem(BaseModel):
    """有次元の 1 次元拡散問題（熱 or 湿気）"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    physics: Literal["heat", "moisture"]
    material: Union[HeatMaterial, MoistureMaterial]
    L: float = Field(gt=0)                 # 壁厚 [m]
    left: BoundarySignal
    right: BoundarySignal
    initial: Initial                       # 一様値 or x [m] -> 値
    tau: float = Field(gt=0)               # 計算期間 [s]
    t_ref: float = Field(gt=0)             # 代表時間 [s]
    reference_value: Optional[float] = None

    @model_validator(mode="after")
    def _check_problem(self):
        if self.physics == "heat" and not isinstance(self.material, HeatMaterial):
            raise InvalidProblemError("heat problem needs a HeatMaterial")
        if self.physics == "moisture" and not isinstance(self.material, MoistureMaterial):
            raise InvalidProblemError("moisture problem needs a MoistureMaterial")
        if not callable(self.initial) and self.reference_value is None and self.initial == 0:
            raise InvalidProblemError("initial value 0 cannot serve as scale")
        if callable(self.initial) and self.reference_value is None:
            raise InvalidProblemError("profile initial condition needs reference_value")
        for side, signal in (("left", self.left), ("right", self.right)):
            if signal.start > _horizon_slack(0.0) or signal.end < self.tau - _horizon_slack(self.tau):
                raise InvalidProblemError(f"{side} boundary signal does not cover [0, tau]")
        lo = self.initial_profile(np.linspace(0.0, self.L, 11))
        floor = ABSOLUTE_ZERO_C if self.physics == "heat" else 0.0
        if np.any(lo <= floor):
            raise InvalidProblemError("initial value outside physical range")
        return self

    @property
    def scale(self) -> float:
        if self.reference_value is not None:
            return float(self.reference_value)
        return float(self.initial)

    @property
    def tau_star(self) -> float:
        return self.tau / self.t_ref

    def initial_profile(self, x):
        x = np.asarray(x, dtype=float)
        if callable(self.initial):
            return np.asarray(self.initial(x), dtype=float) * np.ones_like(x)
        return np.full(x.shape, float(self.initial))


class DimensionlessProblem(BaseModel):
    """無次元化した問題 (x* ∈ [0,1], t* = t/t°)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    physics: Literal["heat", "moisture"]
    fo: float = Field(gt=0)
    left: BoundarySignal
    right: BoundarySignal
    initial: Initial
    tau_star: float = Field(gt=0)
    scale: float = Field(gt=0)
    length: float = Field(gt=0)
    t_ref: float = Field(gt=0)
    material: Optional[MoistureMaterial] = None

    _kappa0: float = PrivateAttr(default=1.0)

    @model_validator(mode="after")
    def _check_moisture(self):
        if self.physics == "moisture":
            if self.material is None:
                raise InvalidProblemError("moisture problem needs its material")
            self._kappa0 = float(self.material.kappa(self.scale))
        return self

    def kappa_star(self, v):
        if self.physics == "heat":
            return np.ones(np.shape(v))
        return self.material.kappa(np.asarray(v, dtype=float) * self.scale) / self._kappa0

    def dkappa_star(self, v):
        if self.physics == "heat":
            return np.zeros(np.shape(v))
        return self.material.dkappa(np.asarray(v, dtype=float) * self.scale) * self.scale / self._kappa0

    def xi_star(self, v):
        if self.physics == "heat":
            return np.ones(np.shape(v))
        xi0 = float(self.material.capacity(self.scale))
        return self.material.capacity(np.asarray(v, dtype=float) * self.scale) / xi0

    def conductivity(self, v):
        return self.kappa_star(v)

    def initial_profile(self, x_star):
        x_star = np.asarray(x_star, dtype=float)
        if callable(self.initial):
            return np.asarray(self.initial(x_star), dtype=float) * np.ones_like(x_star)
        return np.full(x_star.shape, float(self.initial))

    def boundary_values(self, t_star):
        return self.left.evaluate(t_star), self.right.evaluate(t_star)

    def check_state(self, v, where: str = "") -> None:
        """κ*, ξ* が状態 v で正であることを確認"""
        if self.physics == "heat":
            return
        v = np.asarray(v, dtype=float)
        bad = np.flatnonzero((self.kappa_star(v) <= 0) | (self.xi_star(v) <= 0))
        if bad.size:
            raise ConstitutiveRangeError(
                f"constitutive range violated{where} at index {int(bad[0])} (v={v.flat[bad[0]]:.6g})",
                location=float(bad[0]))


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


class SolutionField(BaseModel):
    """空間 × 時間の解（ソルバー情報と計算時間付き）"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x_nodes: np.ndarray
    t_samples: np.ndarray
    values: np.ndarray                      # (N_t, N_x)
    solver_id: str
    cpu_seconds: float = 0.0
    units: Literal["dimensionless", "physical"] = "dimensionless"
    coeffs: Optional[np.ndarray] = None     # Chebyshev 係数 (N_t, n+1)

    @field_validator("x_nodes", "t_samples", "values", mode="before")
    @classmethod
    def _as_array(cls, v):
        return _readonly(v)

    @field_validator("coeffs", mode="before")
    @classmethod
    def _as_coeffs(cls, v):
        return None if v is None else _readonly(v)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.values.shape != (self.t_samples.size, self.x_nodes.size):
            raise ContractError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.t_samples.size}, {self.x_nodes.size})")
        if self.x_nodes.size > 1 and np.any(np.diff(self.x_nodes) <= 0):
            raise ContractError("x_nodes must be strictly increasing")
        if self.t_samples.size > 2:
            dt = np.diff(self.t_samples)
            if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12 * max(1.0, abs(self.t_samples[-1]))):
                raise ContractError("t_samples must be uniform")
        if not np.all(np.isfinite(self.values)):
            raise ContractError(f"non-finite values in field from {self.solver_id}")
        if self.coeffs is not None and self.coeffs.shape[0] != self.t_samples.size:
            raise ContractError("coeffs must have one row per output sample")
        return self

    @property
    def final_profile(self) -> np.ndarray:
        return self.values[-1]

    def history_at(self, x: float) -> np.ndarray:
        """位置 x での時間履歴（節点間は線形補間）"""
        idx = np.searchsorted(self.x_nodes, x)
        if idx < self.x_nodes.size and math.isclose(self.x_nodes[idx], x, rel_tol=0, abs_tol=1e-12):
            return self.values[:, idx]
        return np.array([np.interp(x, self.x_nodes, row) for row in self.values])


def nondimensionalize(p: DiffusionProblem) -> DimensionlessProblem:
    """有次元問題を無次元化（Fo 数と u = T/T0 or v = P_v/P_v,0）"""
    scale = p.scale
    if not scale > 0:
        raise InvalidProblemError(f"scale must be positive, got {scale}")
    if p.physics == "heat":
        m = p.material
        fo = m.k * p.t_ref / (m.rho * m.c * p.L ** 2)
        material = None
    else:
        m = p.material
        kappa0 = float(m.kappa(scale))
        xi0 = float(m.capacity(scale))
        if kappa0 <= 0 or xi0 <= 0:
            raise ConstitutiveRangeError("reference kappa/xi must be positive")
        fo = kappa0 * p.t_ref / (xi0 * p.L ** 2)
        material = m
    if callable(p.initial):
        initial = partial(_scaled_profile, p.initial, p.L, scale)
    else:
        initial = float(p.initial) / scale
    return DimensionlessProblem(
        physics=p.physics,
        fo=fo,
        left=p.left.scaled(scale, p.t_ref),
        right=p.right.scaled(scale, p.t_ref),
        initial=initial,
        tau_star=p.tau_star,
        scale=scale,
        length=p.L,
        t_ref=p.t_ref,
        material=material,
    )


def _check_pairing(field: SolutionField, length: float, horizon: float, units: str) -> None:
    if field.units != units:
        raise ContractError(f"expected a {units} field, got {field.units}")
    if not math.isclose(field.x_nodes[0], 0.0, abs_tol=1e-9 * length) or \
            not math.isclose(field.x_nodes[-1], length, rel_tol=1e-9):
        raise ContractError("field grid does not span the problem's wall")
    if not math.isclose(field.t_samples[-1], horizon, rel_tol=1e-9, abs_tol=1e-12):
        raise ContractError("field horizon does not match the problem's horizon")


def redimensionalize(field: SolutionField, p: DiffusionProblem) -> SolutionField:
    """無次元解を物理単位に戻す"""
    _check_pairing(field, 1.0, p.tau_star, "dimensionless")
    scale = p.scale
    return SolutionField(
        x_nodes=field.x_nodes * p.L,
        t_samples=field.t_samples * p.t_ref,
        values=field.values * scale,
        solver_id=field.solver_id,
        cpu_seconds=field.cpu_seconds,
        units="physical",
        coeffs=None if field.coeffs is None else field.coeffs * scale,
    )


def to_dimensionless(field: SolutionField, p: DiffusionProblem) -> SolutionField:
    """物理単位の解（RC モデル）を無次元化"""
    _check_pairing(field, p.L, p.tau, "physical")
    scale = p.scale
    return SolutionField(
        x_nodes=field.x_nodes / p.L,
        t_samples=field.t_samples / p.t_ref,
        values=field.values / scale,
        solver_id=field.solver_id,
        cpu_seconds=field.cpu_seconds,
        units="dimensionless",
        coeffs=None if field.coeffs is None else field.coeffs / scale,
    )
