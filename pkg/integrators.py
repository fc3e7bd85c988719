"""
Time integrators shared by the solvers: explicit Euler, Dormand-Prince 5(4) and TR-BDF2
"""
import logging
import math
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import lu_factor, lu_solve

from errors import ContractError, IntegrationError, StiffnessError, StiffSolveError

logger = logging.getLogger(__name__)

# ステップ幅の下限 (区間長に対する比)
STEP_FLOOR = 1e-14


class OdeSystem(BaseModel):
    """常微分方程式系 y' = f(t, y)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dimension: int = Field(ge=1)
    rhs: Callable
    jacobian_policy: Literal["numeric", "none"] = "numeric"
    jacobian: Optional[Callable] = None   # 解析的ヤコビアン (t, y) -> 行列

    def f(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.rhs(t, y)


class ToleranceSpec(BaseModel):
    """許容誤差（デフォルトは絶対・相対とも 1e-4）"""
    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default=1e-4, gt=0)
    rel_tol: float = Field(default=1e-4, gt=0)
    initial_step: Optional[float] = Field(default=None, gt=0)
    max_step: float = Field(default=math.inf, gt=0)


class Trajectory(BaseModel):
    """出力時刻での状態と積分統計"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    states: np.ndarray          # (len(times), dimension)
    n_accepted: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    n_jac: int = 0

    @model_validator(mode="after")
    def _check_shape(self):
        if self.states.shape[0] != self.times.size:
            raise ContractError("one state row per output time required")
        return self


def _check_outputs(t0: float, t1: float, output_times) -> np.ndarray:
    if not t0 < t1:
        raise ContractError(f"integration interval must satisfy t0 < t1 (got {t0}, {t1})")
    out = np.asarray(output_times, dtype=float)
    slack = 1e-12 * max(1.0, abs(t1))
    if out.size == 0 or np.any(np.diff(out) < 0):
        raise ContractError("output_times must be non-empty and non-decreasing")
    if out[0] < t0 - slack or out[-1] > t1 + slack:
        raise ContractError("output_times must lie in [t0, t1]")
    return np.clip(out, t0, t1)


def _finite_or_raise(value: np.ndarray, t: float) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise IntegrationError(f"non-finite right-hand side at t={t:.6g}", t=t)
    return value


def _rms(v: np.ndarray) -> float:
    return math.sqrt(float(np.mean(v * v)))


# ---------------------------------------------------------------------------
# 陽的 Euler
# ---------------------------------------------------------------------------

def step_euler_explicit(sys: OdeSystem, t: float, state: np.ndarray, dt: float) -> np.ndarray:
    """陽的 Euler 1 ステップ: state + dt·f(t, state)"""
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    return state + dt * _finite_or_raise(sys.rhs(t, state), t)


def integrate_euler(sys: OdeSystem, t0: float, t1: float, dt: float, state0, output_times) -> Trajectory:
    """固定ステップの陽的 Euler（出力はステップ間の線形補間）"""
    out_t = _check_outputs(t0, t1, output_times)
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    y = np.array(state0, dtype=float)
    states = np.empty((out_t.size, y.size))
    n_steps = int(math.ceil((t1 - t0) / dt - 1e-9))
    idx = 0
    t = t0
    while idx < out_t.size and out_t[idx] <= t0:
        states[idx] = y
        idx += 1
    for m in range(n_steps):
        h = min(dt, t1 - t)
        if h <= 0:
            break
        y_new = step_euler_explicit(sys, t, y, h)
        t_new = t0 + (m + 1) * dt if m + 1 < n_steps else t1
        while idx < out_t.size and out_t[idx] <= t_new:
            theta = (out_t[idx] - t) / (t_new - t)
            states[idx] = (1.0 - theta) * y + theta * y_new
            idx += 1
        t, y = t_new, y_new
    while idx < out_t.size:
        states[idx] = y
        idx += 1
    return Trajectory(times=out_t, states=states, n_accepted=n_steps, n_rhs=n_steps)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)
# ---------------------------------------------------------------------------

DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# 5 次解と埋め込み 4 次解の差
DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# 4 次の連続出力 (θ, θ², θ³, θ⁴ の係数)
DP_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI 制御の指数 (誤差推定は 4 次)
PI_ALPHA = 0.7 / 5
PI_BETA = 0.4 / 5


def _initial_step(sys: OdeSystem, t0: float, y0: np.ndarray, f0: np.ndarray, tol: ToleranceSpec,
                  order: int, span: float) -> float:
    scale = tol.abs_tol + tol.rel_tol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = sys.rhs(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1, tol.max_step, span)


def integrate_adaptive_rk(sys: OdeSystem, t0: float, t1: float, state0, tol: ToleranceSpec,
                          output_times) -> Trajectory:
    """Dormand-Prince 5(4)・PI ステップ制御・連続出力"""
    out_t = _check_outputs(t0, t1, output_times)
    y = np.array(state0, dtype=float)
    dim = y.size
    states = np.empty((out_t.size, dim))
    idx = 0
    while idx < out_t.size and out_t[idx] <= t0:
        states[idx] = y
        idx += 1

    t = t0
    span = t1 - t0
    floor = STEP_FLOOR * span
    f = _finite_or_raise(sys.rhs(t, y), t)
    n_rhs = 1
    h = tol.initial_step or _initial_step(sys, t, y, f, tol, 4, span)
    n_rhs += 0 if tol.initial_step else 1
    K = np.empty((7, dim))
    err_prev = 1.0
    accepted = rejected = 0

    while t < t1:
        h = min(h, tol.max_step, t1 - t)
        if h < floor and t1 - t > floor:
            raise StiffnessError(f"step size underflow at t={t:.6g} (h={h:.3g})", t=t)
        K[0] = f
        for i in range(1, 7):
            K[i] = sys.rhs(t + DP_C[i] * h, y + h * (DP_A[i] @ K[:i]))
        n_rhs += 6
        y_new = y + h * (DP_B[:6] @ K[:6])
        err = h * (DP_E @ K)
        scale = tol.abs_tol + tol.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(err / scale) if np.all(np.isfinite(y_new)) and np.all(np.isfinite(K[6])) else math.inf

        if err_norm <= 1.0:
            t_new = t + h if t1 - (t + h) > floor else t1
            while idx < out_t.size and out_t[idx] <= t_new:
                theta = (out_t[idx] - t) / h
                powers = np.array([theta, theta ** 2, theta ** 3, theta ** 4])
                states[idx] = y + h * (K.T @ (DP_P @ powers))
                idx += 1
            if err_norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * err_norm ** (-PI_ALPHA) * err_prev ** PI_BETA
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            err_prev = max(err_norm, 1e-4)
            t, y, f = t_new, y_new, K[6].copy()
            h *= factor
            accepted += 1
        else:
            if math.isinf(err_norm):
                h *= MIN_FACTOR
            else:
                h *= max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
            rejected += 1

    while idx < out_t.size:
        states[idx] = y
        idx += 1
    logger.debug("[RK45] accepted=%d rejected=%d rhs=%d", accepted, rejected, n_rhs)
    return Trajectory(times=out_t, states=states, n_accepted=accepted, n_rejected=rejected, n_rhs=n_rhs)


# ---------------------------------------------------------------------------
# TR-BDF2（硬い系）
# ---------------------------------------------------------------------------

GAMMA = 2.0 - math.sqrt(2.0)
D_COEF = GAMMA / 2.0                       # 両段で共通の対角係数
W_STAGE = (math.sqrt(2.0) + 1.0) / 2.0     # BDF2 段の z の重み
W_START = (math.sqrt(2.0) - 1.0) / 2.0     # BDF2 段の y_n の重み
# 局所誤差係数 k·h³·y''' の k
ERR_K = (-3.0 * GAMMA ** 2 + 4.0 * GAMMA - 2.0) / (12.0 * (2.0 - GAMMA))
NEWTON_MAX_ITER = 8
NEWTON_TOL = 0.03


def numeric_jacobian(sys: OdeSystem, t: float, y: np.ndarray, f0: np.ndarray) -> np.ndarray:
    """前進差分ヤコビアン"""
    dim = y.size
    jac = np.empty((dim, dim))
    eps = math.sqrt(np.finfo(float).eps)
    for j in range(dim):
        delta = eps * max(1.0, abs(y[j]))
        yp = y.copy()
        yp[j] += delta
        jac[:, j] = (sys.rhs(t, yp) - f0) / delta
    return jac


class _Newton:
    """簡略 Newton（ヤコビアンは失敗時のみ更新）"""

    def __init__(self, sys: OdeSystem, tol: ToleranceSpec):
        self.sys = sys
        self.tol = tol
        self.jac = None
        self.jac_current = False
        self.lu = None
        self.lu_h = None
        self.n_rhs = 0
        self.n_jac = 0

    def update_jacobian(self, t: float, y: np.ndarray, f: np.ndarray) -> None:
        if self.sys.jacobian is not None:
            self.jac = np.asarray(self.sys.jacobian(t, y), dtype=float)
        elif self.sys.jacobian_policy == "numeric":
            self.jac = numeric_jacobian(self.sys, t, y, f)
            self.n_rhs += y.size
        else:
            self.jac = np.zeros((y.size, y.size))
        self.n_jac += 1
        self.jac_current = True
        self.lu = None

    def factor(self, h: float) -> None:
        if self.lu is None or self.lu_h != h:
            self.lu = lu_factor(np.eye(self.jac.shape[0]) - D_COEF * h * self.jac)
            self.lu_h = h

    def solve(self, t: float, h: float, const: np.ndarray, guess: np.ndarray):
        """x − d·h·f(t, x) = const を解く。収束しなければ None"""
        x = guess.copy()
        rate_prev = None
        norm_prev = None
        for _ in range(NEWTON_MAX_ITER):
            fx = self.sys.rhs(t, x)
            self.n_rhs += 1
            if not np.all(np.isfinite(fx)):
                return None
            residual = x - D_COEF * h * fx - const
            dx = lu_solve(self.lu, -residual)
            x = x + dx
            scale = self.tol.abs_tol + self.tol.rel_tol * np.abs(x)
            norm = _rms(dx / scale)
            if norm_prev is not None:
                rate = norm / norm_prev
                if rate >= 0.9:
                    return None
                rate_prev = rate
            if norm <= NEWTON_TOL * (1.0 if rate_prev is None else (1.0 - rate_prev)) or norm < 1e-10:
                fx = self.sys.rhs(t, x)
                self.n_rhs += 1
                return x, fx
            norm_prev = norm
        return None


def integrate_stiff(sys: OdeSystem, t0: float, t1: float, state0, tol: ToleranceSpec,
                    output_times) -> Trajectory:
    """TR-BDF2（γ = 2 − √2）、数値ヤコビアン・簡略 Newton・出力時刻で停止"""
    out_t = _check_outputs(t0, t1, output_times)
    y = np.array(state0, dtype=float)
    dim = y.size
    states = np.empty((out_t.size, dim))
    idx = 0
    while idx < out_t.size and out_t[idx] <= t0:
        states[idx] = y
        idx += 1

    t = t0
    span = t1 - t0
    floor = STEP_FLOOR * span
    f = _finite_or_raise(sys.rhs(t, y), t)
    newton = _Newton(sys, tol)
    newton.n_rhs = 1
    newton.update_jacobian(t, y, f)
    h = tol.initial_step or _initial_step(sys, t, y, f, tol, 2, span)
    accepted = rejected = 0

    while t < t1:
        h = min(h, tol.max_step)
        # 次の出力時刻・終端でステップを止める
        target = out_t[idx] if idx < out_t.size and out_t[idx] > t else t1
        hit = False
        h_free = h
        if t + h >= target - floor:
            h = target - t
            hit = True
        if h < floor:
            raise StiffnessError(f"step size underflow at t={t:.6g} (h={h:.3g})", t=t)

        newton.factor(h)
        stage = newton.solve(t + GAMMA * h, h, y + D_COEF * h * f, y + GAMMA * h * f)
        result = None
        if stage is not None:
            z, fz = stage
            guess = z + (1.0 - GAMMA) * h * fz
            result = newton.solve(t + h, h, W_STAGE * z - W_START * y, guess)
        if result is None:
            if not newton.jac_current:
                newton.update_jacobian(t, y, f)
            else:
                h *= 0.5
                if h < floor:
                    raise StiffSolveError(f"Newton iteration failed to converge at t={t:.6g}", t=t)
            rejected += 1
            continue
        y_new, f_new = result

        lte = 2.0 * ERR_K * h * (f / GAMMA - fz / (GAMMA * (1.0 - GAMMA)) + f_new / (1.0 - GAMMA))
        err = lu_solve(newton.lu, lte)
        scale = tol.abs_tol + tol.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(err / scale)

        if err_norm <= 1.0:
            t = target if hit else t + h
            y, f = y_new, f_new
            newton.jac_current = False
            while idx < out_t.size and out_t[idx] <= t + floor:
                states[idx] = y
                idx += 1
            factor = MAX_FACTOR if err_norm == 0.0 else SAFETY * err_norm ** (-1.0 / 3.0)
            h *= min(5.0, max(MIN_FACTOR, factor))
            if hit:
                h = max(h, h_free)
            accepted += 1
        else:
            h *= max(MIN_FACTOR, SAFETY * err_norm ** (-1.0 / 3.0))
            rejected += 1

    while idx < out_t.size:
        states[idx] = y
        idx += 1
    logger.debug("[TRBDF2] accepted=%d rejected=%d rhs=%d jac=%d",
                 accepted, rejected, newton.n_rhs, newton.n_jac)
    return Trajectory(times=out_t, states=states, n_accepted=accepted, n_rejected=rejected,
                      n_rhs=newton.n_rhs, n_jac=newton.n_jac)
