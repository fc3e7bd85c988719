"""
Chebyshev-Tau spectral reduced-order solver

Basis operations (Clenshaw evaluation, derivative recurrences, Gauss projection),
Tau elimination of the two boundary rows, and the linear / nonlinear coefficient ODEs.
The wall x* in [0, 1] is mapped onto X in [-1, 1] by X = 2x* - 1.
"""
import logging
import math
import time
from functools import lru_cache
from typing import Callable, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import ConstitutiveRangeError, ContractError, DomainError
from integrators import OdeSystem, ToleranceSpec, integrate_adaptive_rk, integrate_stiff
from models import DimensionlessProblem, SolutionField
from solver_fdm import output_times

logger = logging.getLogger(__name__)

# x* ∈ [0,1] → X ∈ [−1,1] で 2 階微分に掛かる係数
DOMAIN_FACTOR = 4.0
DOMAIN_SLACK = 1e-12


class ChebState(BaseModel):
    """Chebyshev 係数 a_0 … a_n"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a: np.ndarray

    @field_validator("a", mode="before")
    @classmethod
    def _as_array(cls, v):
        arr = np.array(v, dtype=float)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check(self):
        if self.a.ndim != 1 or self.a.size < 3:
            raise ContractError("ChebState needs n >= 2 (at least three coefficients)")
        if not np.all(np.isfinite(self.a)):
            raise ContractError("non-finite Chebyshev coefficients")
        return self

    @property
    def n(self) -> int:
        return self.a.size - 1


class GaussGrid(BaseModel):
    """Chebyshev–Gauss 節点 X_q = cos(π(2q+1)/(2m))"""
    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)

    @property
    def theta(self) -> np.ndarray:
        return math.pi * (2.0 * np.arange(self.m) + 1.0) / (2.0 * self.m)

    @property
    def nodes(self) -> np.ndarray:
        return np.cos(self.theta)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.m, math.pi / self.m)


def _c(n: int) -> np.ndarray:
    c = np.ones(n + 1)
    c[0] = 2.0
    return c


def _coeffs(state) -> np.ndarray:
    if isinstance(state, ChebState):
        return state.a
    return np.asarray(state, dtype=float)


def cheb_eval(state: Union[ChebState, np.ndarray], X):
    """Clenshaw 漸化式で Σ a_i T_i(X) を評価"""
    a = _coeffs(state)
    x = np.asarray(X, dtype=float)
    if np.any(np.abs(x) > 1.0 + DOMAIN_SLACK):
        raise DomainError("Chebyshev evaluation point outside [-1, 1]")
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for coef in a[:0:-1]:
        b1, b2 = 2.0 * x * b1 - b2 + coef, b1
    out = x * b1 - b2 + a[0]
    return float(out) if np.ndim(X) == 0 else out


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=64)
def first_derivative_matrix(n: int) -> np.ndarray:
    """ã_i = (2/c_i) Σ_{p>i, p+i 奇数} p·a_p"""
    c = _c(n)
    d = np.zeros((n + 1, n + 1))
    for i in range(n):
        for p in range(i + 1, n + 1, 2):
            d[i, p] = 2.0 * p / c[i]
    return _readonly(d)


@lru_cache(maxsize=64)
def second_derivative_matrix(n: int) -> np.ndarray:
    """ã̃_i = (1/c_i) Σ_{p≥i+2, p+i 偶数} p(p² − i²)·a_p"""
    c = _c(n)
    d = np.zeros((n + 1, n + 1))
    for i in range(n - 1):
        for p in range(i + 2, n + 1, 2):
            d[i, p] = p * (p * p - i * i) / c[i]
    return _readonly(d)


def derivative_coeffs_first(a) -> np.ndarray:
    a = _coeffs(a)
    return first_derivative_matrix(a.size - 1) @ a


def derivative_coeffs_second(a) -> np.ndarray:
    a = _coeffs(a)
    return second_derivative_matrix(a.size - 1) @ a


@lru_cache(maxsize=64)
def gauss_vandermonde(n: int, m: int) -> np.ndarray:
    """T_i(X_q) = cos(i·θ_q) の行列 (m × (n+1))"""
    theta = GaussGrid(m=m).theta
    return _readonly(np.cos(np.outer(theta, np.arange(n + 1))))


@lru_cache(maxsize=64)
def gauss_projector(n: int, m: int) -> np.ndarray:
    """節点値 → 係数 a_i = (2/(m c_i)) Σ_q f(X_q) T_i(X_q)"""
    v = gauss_vandermonde(n, m)
    return _readonly((2.0 / (m * _c(n)))[:, None] * v.T)


def project_initial(u0: Callable, n: int, m: Optional[int] = None) -> ChebState:
    """初期分布の Galerkin 射影（Chebyshev–Gauss 求積, m ≥ n+1 点）"""
    m = m or 2 * (n + 1)
    if m < n + 1:
        raise ContractError(f"projection needs at least n+1={n + 1} Gauss nodes (got {m})")
    values = np.asarray(u0(GaussGrid(m=m).nodes), dtype=float) * np.ones(m)
    return ChebState(a=gauss_projector(n, m) @ values)


class TauReduction(BaseModel):
    """Tau 境界条件の消去: a = E·a_red + g_L·u_L + g_R·u_R"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(ge=2)
    E: np.ndarray
    g_left: np.ndarray
    g_right: np.ndarray

    @classmethod
    def build(cls, n: int) -> "TauReduction":
        if n < 2:
            raise ContractError(f"Tau elimination needs n >= 2 (got {n})")
        sign_n = (-1.0) ** n
        alt = (-1.0) ** np.arange(n - 1)
        E = np.zeros((n + 1, n - 1))
        E[: n - 1] = np.eye(n - 1)
        # Σ a_i = u_R, Σ (−1)^i a_i = u_L を a_{n−1}, a_n について解く
        E[n - 1] = 0.5 * (-1.0 + sign_n * alt)
        E[n] = 0.5 * (-1.0 - sign_n * alt)
        g_left = np.zeros(n + 1)
        g_right = np.zeros(n + 1)
        g_left[n - 1], g_left[n] = -0.5 * sign_n, 0.5 * sign_n
        g_right[n - 1], g_right[n] = 0.5, 0.5
        return cls(n=n, E=_readonly(E), g_left=_readonly(g_left), g_right=_readonly(g_right))

    def full(self, a_red: np.ndarray, u_left: float, u_right: float) -> np.ndarray:
        return self.E @ a_red + self.g_left * u_left + self.g_right * u_right

    def reduce(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=float)[: self.n - 1]


@lru_cache(maxsize=64)
def tau_reduction(n: int) -> TauReduction:
    return TauReduction.build(n)


def assemble_tau_linear(fo_mapped: float, n: int, u_left: float, u_right: float) -> Tuple[np.ndarray, np.ndarray]:
    """線形拡散の縮約 ODE ȧ_red = A·a_red + b"""
    tau = tau_reduction(n)
    d2 = second_derivative_matrix(n)[: n - 1]
    A = fo_mapped * (d2 @ tau.E)
    b = fo_mapped * (d2 @ (tau.g_left * u_left + tau.g_right * u_right))
    return A, b


def _nonlinear_rhs(a_red: np.ndarray, n: int, m: int, fo_mapped: float, nu_fn, lambda_fn,
                   v_left: float, v_right: float) -> np.ndarray:
    tau = tau_reduction(n)
    a = tau.full(a_red, v_left, v_right)
    V = gauss_vandermonde(n, m)
    v = V @ a
    v_x = V @ (first_derivative_matrix(n) @ a)
    v_xx = V @ (second_derivative_matrix(n) @ a)
    nu = nu_fn(v)
    lam = lambda_fn(v)
    if np.any(nu <= 0) or not np.all(np.isfinite(nu)):
        bad = int(np.flatnonzero(~(nu > 0))[0])
        X = GaussGrid(m=m).nodes[bad]
        raise ConstitutiveRangeError(
            f"constitutive range violated at X={X:.6g} (v={v[bad]:.6g})", location=0.5 * (X + 1.0))
    r = fo_mapped * (nu * v_xx + lam * v_x * v_x)
    return (gauss_projector(n, m) @ r)[: n - 1]


def rhs_spectral_nonlinear(state: ChebState, grid: GaussGrid, nu_fn: Callable, lambda_fn: Callable,
                           v_left: float, v_right: float, fo: float) -> np.ndarray:
    """非線形項を Gauss 節点で評価し係数空間に戻す（Tau 消去後の a_0 … a_{n−2} の時間微分）"""
    n = state.n
    if grid.m < n + 1:
        raise ContractError(f"nonlinear projection needs at least n+1={n + 1} Gauss nodes")
    a_red = tau_reduction(n).reduce(state.a)
    return _nonlinear_rhs(a_red, n, grid.m, DOMAIN_FACTOR * fo, nu_fn, lambda_fn, v_left, v_right)


def nonlinear_coefficients(p: DimensionlessProblem) -> Tuple[Callable, Callable]:
    """ν(v) = κ*/ξ*, λ(v) = (dκ*/dv)/ξ*"""
    def nu(v):
        xi = p.xi_star(v)
        return np.where(xi > 0, p.kappa_star(v) / np.where(xi > 0, xi, 1.0), -1.0)

    def lam(v):
        xi = p.xi_star(v)
        return p.dkappa_star(v) / np.where(xi > 0, xi, 1.0)

    return nu, lam


def build_system(p: DimensionlessProblem, n: int, quadrature_factor: int = 2) -> OdeSystem:
    """縮約係数 a_0 … a_{n−2} の ODE 系"""
    fo_mapped = DOMAIN_FACTOR * p.fo
    left, right = p.left, p.right
    if p.physics == "heat":
        A, _ = assemble_tau_linear(fo_mapped, n, 0.0, 0.0)
        tau = tau_reduction(n)
        d2 = second_derivative_matrix(n)[: n - 1]
        b_left = fo_mapped * (d2 @ tau.g_left)
        b_right = fo_mapped * (d2 @ tau.g_right)

        def rhs(t, a_red):
            return A @ a_red + b_left * left.evaluate(t) + b_right * right.evaluate(t)

        return OdeSystem(dimension=n - 1, rhs=rhs, jacobian=lambda t, a_red: A)

    m = quadrature_factor * n
    if m < n + 1:
        raise ContractError("quadrature_factor too small for nonlinear projection")
    nu, lam = nonlinear_coefficients(p)

    def rhs(t, a_red):
        return _nonlinear_rhs(a_red, n, m, fo_mapped, nu, lam, left.evaluate(t), right.evaluate(t))

    return OdeSystem(dimension=n - 1, rhs=rhs)


def reconstruct(coeffs: np.ndarray, x_star: np.ndarray) -> np.ndarray:
    """係数の時系列 (N_t × (n+1)) を x* 上の値に変換"""
    X = 2.0 * np.asarray(x_star, dtype=float) - 1.0
    if np.any(np.abs(X) > 1.0 + DOMAIN_SLACK):
        raise DomainError("reconstruction point outside the wall")
    vander = np.polynomial.chebyshev.chebvander(np.clip(X, -1.0, 1.0), coeffs.shape[1] - 1)
    return coeffs @ vander.T


def solve_spectral(p: DimensionlessProblem, n: int, tol: Optional[ToleranceSpec] = None,
                   samples_per_unit: float = 1.0, integrator: Optional[Literal["rk", "stiff"]] = None,
                   quadrature_factor: int = 2, x_nodes: Optional[np.ndarray] = None,
                   solver_id: str = "Spectral") -> SolutionField:
    """Chebyshev–Tau で解く（線形: 適応 RK, 非線形: 硬い系の積分器）"""
    if n < 2:
        raise ContractError(f"spectral order must be >= 2 (got {n})")
    tol = tol or ToleranceSpec()
    integrator = integrator or ("rk" if p.physics == "heat" else "stiff")
    t_out = output_times(p, samples_per_unit)
    x = np.linspace(0.0, 1.0, 101) if x_nodes is None else np.asarray(x_nodes, dtype=float)

    tau = tau_reduction(n)
    a0 = project_initial(lambda X: p.initial_profile(0.5 * (X + 1.0)), n).a
    a0_red = tau.reduce(a0)
    p.check_state(cheb_eval(tau.full(a0_red, *p.boundary_values(0.0)), 2.0 * x - 1.0), " in initial state")
    system = build_system(p, n, quadrature_factor)

    started = time.perf_counter()
    if integrator == "stiff":
        traj = integrate_stiff(system, 0.0, p.tau_star, a0_red, tol, t_out)
    else:
        traj = integrate_adaptive_rk(system, 0.0, p.tau_star, a0_red, tol, t_out)
    cpu = time.perf_counter() - started

    u_left = p.left.evaluate(t_out)
    u_right = p.right.evaluate(t_out)
    coeffs = traj.states @ tau.E.T + np.outer(u_left, tau.g_left) + np.outer(u_right, tau.g_right)
    values = reconstruct(coeffs, x)
    logger.info("[SPECTRAL] n=%d integrator=%s steps=%d rejected=%d cpu=%.3fs",
                n, integrator, traj.n_accepted, traj.n_rejected, cpu)
    return SolutionField(x_nodes=x, t_samples=t_out, values=values, solver_id=solver_id,
                         cpu_seconds=cpu, coeffs=coeffs)
