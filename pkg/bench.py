"""
Benchmark orchestration: run configuration, solver dispatch, scoring against the reference, sweeps
"""
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

import report
from cases import CasePreset, build_problem, get_preset
from errors import ConfigurationError, DifftrioError
from integrators import ToleranceSpec
from metrics import (
    ErrorReport, FluxSeries, aggregate, daily_loads, error_report, flux, flux_location, flux_scale, resample,
)
from models import DiffusionProblem, DimensionlessProblem, SolutionField, nondimensionalize, to_dimensionless
from oracle import OracleCertificate, OracleLevel, reference_solution
from settings import init_output_dir, resolve_jobs
from solver_fdm import FdmGrid, output_times, solve_fdm
from solver_rc import DtPolicy, solve_rc
from solver_spectral import solve_spectral

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class SolverSpec(BaseModel):
    """1 ソルバー分の設定"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["rc", "fdm", "spectral"]
    label: Optional[str] = None
    r: Optional[int] = Field(default=None, ge=2)
    dt_policy: Literal["auto", "fixed"] = "auto"
    dt_seconds: Optional[float] = Field(default=None, gt=0)
    cfl_fraction: float = Field(default=0.5, gt=0, le=1.0)
    n_cells: Optional[int] = Field(default=None, ge=2)
    n: Optional[int] = Field(default=None, ge=2)
    quadrature_factor: int = Field(default=2, ge=1)
    integrator: Optional[Literal["rk", "stiff"]] = None

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "rc" and self.r is None:
            raise ConfigurationError("rc solver needs 'r'")
        if self.kind == "rc" and self.dt_policy == "fixed" and self.dt_seconds is None:
            raise ConfigurationError("rc solver with dt_policy 'fixed' needs 'dt_seconds'")
        return self

    def resolved_label(self) -> str:
        if self.label:
            return self.label
        return {"rc": f"R{self.r}C", "fdm": "FDM", "spectral": "Spectral"}[self.kind]


class OutputConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    samples_per_unit: float = Field(default=1.0, gt=0)
    flux_location: Union[Literal["left", "right"], float] = "right"


class IoConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    output_dir: Optional[str] = None
    bc_csv: Optional[str] = None
    discard_days: float = Field(default=7.0, ge=0)
    max_gap_factor: float = Field(default=2.0, gt=1.0)


class RunConfig(BaseModel):
    """実行設定（JSON, schema_version 1）"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: int = SCHEMA_VERSION
    case: str
    solvers: Optional[List[SolverSpec]] = None
    tolerances: ToleranceSpec = Field(default_factory=ToleranceSpec)
    output: OutputConfig = Field(default_factory=OutputConfig)
    io: IoConfig = Field(default_factory=IoConfig)
    seed: int = 0
    jobs: int = Field(default=1, ge=1)
    oracle: OracleLevel = Field(default_factory=OracleLevel)
    sweep_r: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {self.schema_version}")
        get_preset(self.case)
        if self.solvers is not None and len(self.solvers) == 0:
            raise ConfigurationError("solver list is empty")
        labels = [s.resolved_label() for s in self.solver_list()]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate solver labels: {labels}")
        return self

    @property
    def preset(self) -> CasePreset:
        return get_preset(self.case)

    def solver_list(self) -> List[SolverSpec]:
        if self.solvers is not None:
            return list(self.solvers)
        return [SolverSpec(**s) for s in self.preset.solvers]


def load_config(path: Union[str, Path]) -> RunConfig:
    """設定ファイルの読み込み（誤りは ConfigurationError）"""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"invalid JSON in {path}: {e}")
    return parse_config(raw)


def parse_config(raw: Dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"invalid config: {e}")


class CaseContext(BaseModel):
    """1 ケース分の問題と共通出力格子"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    problem: DiffusionProblem
    dimless: DimensionlessProblem
    x_nodes: np.ndarray
    x0_star: float


def build_context(config: RunConfig) -> CaseContext:
    problem = build_problem(config.case, config.io.bc_csv, config.seed, config.io.discard_days,
                            config.io.max_gap_factor)
    dimless = nondimensionalize(problem)
    x0 = flux_location(config.output.flux_location, problem.L)
    return CaseContext(problem=problem, dimless=dimless, x_nodes=FdmGrid(n_cells=config.preset.n_cells).nodes,
                       x0_star=x0 / problem.L)


class SolverOutcome(BaseModel):
    """1 ソルバーの実行結果（失敗時は field なし）"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    label: str
    kind: str
    field: Optional[SolutionField] = None
    status: str = "ok"
    detail: str = ""


def run_solver(spec: SolverSpec, ctx: CaseContext, config: RunConfig) -> SolutionField:
    """ソルバーを 1 つ実行し、無次元の解を返す"""
    label = spec.resolved_label()
    spu = config.output.samples_per_unit
    if spec.kind == "rc":
        policy = DtPolicy(mode=spec.dt_policy, dt_seconds=spec.dt_seconds, cfl_fraction=spec.cfl_fraction)
        return to_dimensionless(solve_rc(ctx.problem, spec.r, policy, spu, label), ctx.problem)
    if spec.kind == "fdm":
        grid = FdmGrid(n_cells=spec.n_cells or config.preset.n_cells)
        return solve_fdm(ctx.dimless, grid, config.tolerances, spu, spec.integrator or "rk", label)
    return solve_spectral(ctx.dimless, spec.n or config.preset.spectral_order, config.tolerances, spu,
                          spec.integrator, spec.quadrature_factor, ctx.x_nodes, label)


def _guarded(spec: SolverSpec, ctx: CaseContext, config: RunConfig) -> SolverOutcome:
    label = spec.resolved_label()
    try:
        field = run_solver(spec, ctx, config)
    except DifftrioError as e:
        logger.error("[BENCH] %s failed: %s", label, e.detail)
        return SolverOutcome(label=label, kind=spec.kind, status=f"failed:{type(e).__name__}", detail=e.detail)
    return SolverOutcome(label=label, kind=spec.kind, field=field)


def _solve_job(config_data: Dict, index: int) -> SolverOutcome:
    """プロセスプール用: 設定から問題を組み立て直して 1 ソルバーを実行"""
    config = RunConfig.model_validate(config_data)
    ctx = build_context(config)
    return _guarded(config.solver_list()[index], ctx, config)


def run_solvers(config: RunConfig, ctx: CaseContext, jobs: int = 1,
                specs: Optional[List[SolverSpec]] = None) -> List[SolverOutcome]:
    """全ソルバーを実行（jobs > 1 ならプロセス並列、結果は設定順）"""
    specs = specs if specs is not None else config.solver_list()
    if jobs <= 1 or len(specs) <= 1:
        return [_guarded(s, ctx, config) for s in specs]
    run_config = config.model_copy(update={"solvers": specs})
    payload = run_config.model_dump()
    logger.info("[BENCH] running %d solvers on %d workers", len(specs), jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_solve_job, payload, i) for i in range(len(specs))]
        return [f.result() for f in futures]


def reference_for(config: RunConfig, ctx: CaseContext,
                  outcomes: List[SolverOutcome]) -> Tuple[SolutionField, Optional[OracleCertificate]]:
    """参照解（ケース 1, 2: 認証付きオラクル、ケース 3: スペクトル解）"""
    preset = config.preset
    spu = config.output.samples_per_unit
    if preset.reference == "oracle":
        return reference_solution(ctx.dimless, config.oracle, spu, preset.n_cells)
    for outcome in outcomes:
        if outcome.kind == "spectral" and outcome.field is not None \
                and outcome.field.coeffs is not None and outcome.field.coeffs.shape[1] - 1 == preset.spectral_order:
            return outcome.field, None
    logger.info("[BENCH] solving spectral reference n=%d", preset.spectral_order)
    field = solve_spectral(ctx.dimless, preset.spectral_order, config.tolerances, spu,
                           x_nodes=ctx.x_nodes, solver_id="Spectral")
    return field, None


def score(outcome: SolverOutcome, ref: SolutionField, ctx: CaseContext) -> Dict:
    """metrics.csv の 1 行"""
    row = {"solver": outcome.label, "status": outcome.status, "detail": outcome.detail}
    if outcome.field is None:
        return row
    ref_flux = flux(ref, "spectral" if ref.coeffs is not None else "fdm", ctx.dimless.conductivity, ctx.x0_star)
    try:
        rep: ErrorReport = error_report(outcome.field, ref, ctx.problem, ctx.dimless.conductivity, outcome.kind,
                                        ctx.x0_star, ref_flux)
    except DifftrioError as e:
        logger.error("[BENCH] scoring %s failed: %s", outcome.label, e.detail)
        row.update(status=f"failed:{type(e).__name__}", detail=e.detail)
        return row
    row.update(
        field_eps_inf=rep.eps_inf,
        flux_eps_inf=rep.flux_eps_inf,
        scd=rep.scd,
        r_cpu_ms_per_h=rep.r_cpu_ms_per_h,
        flux_eps_inf_dimensional=rep.flux_eps_inf_dimensional,
        max_abs_deviation=rep.max_abs_deviation,
        cpu_seconds=rep.cpu_seconds,
        eps2_profile=rep.eps2_profile,
        eps2_x=rep.x_nodes,
    )
    return row


class BenchReport(BaseModel):
    """1 回の実行結果のまとめ"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    case: str
    rows: List[Dict]
    certificate: Optional[OracleCertificate] = None
    files: List[str] = Field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(1 for row in self.rows if row["status"] != "ok")


def emit_outputs(out_dir: Path, config: RunConfig, ctx: CaseContext, outcomes: List[SolverOutcome],
                 ref: Optional[SolutionField], rows: List[Dict]) -> List[Path]:
    """CSV と SVG の書き出し（単一の書き手）"""
    p = ctx.problem
    files = [report.write_metrics_csv(rows, out_dir), report.write_metrics_csv(rows, out_dir, extended=True)]
    fields = {o.label: resample(o.field, ctx.x_nodes) for o in outcomes if o.field is not None}
    ref_label = "Reference" if config.preset.reference == "oracle" else None
    if ref is not None and ref_label:
        fields = {ref_label: resample(ref, ctx.x_nodes), **fields}
    if not fields:
        return files

    unit = "degC" if p.physics == "heat" else "Pa"
    x_m = ctx.x_nodes * p.L
    t_h = output_times(ctx.dimless, config.output.samples_per_unit) * p.t_ref / 3600.0
    finals = {k: f.final_profile * p.scale for k, f in fields.items()}
    mids = {k: f.history_at(0.5) * p.scale for k, f in fields.items()}
    files.append(report.write_columns_csv(out_dir / "profiles_final.csv", "x_m", x_m, finals))
    files.append(report.write_columns_csv(out_dir / "history_mid.csv", "t_h", t_h, mids))
    files.append(report.plot_lines(out_dir / "profile_final.svg", x_m, finals, "x [m]", unit,
                                   "final-time profile", reference=ref_label))
    files.append(report.plot_lines(out_dir / "history_mid.svg", t_h, mids, "t [h]", unit,
                                   "mid-wall history", reference=ref_label))

    # 流束（物理単位）は各ソルバー自身の格子で計算
    scale = flux_scale(p)
    fluxes = {}
    if ref is not None and ref_label:
        fluxes[ref_label] = flux(ref, "spectral", ctx.dimless.conductivity, ctx.x0_star).q * scale
    for o in outcomes:
        if o.field is None:
            continue
        try:
            fluxes[o.label] = flux(o.field, o.kind, ctx.dimless.conductivity, ctx.x0_star).q * scale
        except DifftrioError as e:
            logger.error("[BENCH] flux for %s unavailable: %s", o.label, e.detail)
    loc = config.output.flux_location
    flux_unit = "W/m2" if p.physics == "heat" else "kg/(m2 s)"
    if fluxes:
        files.append(report.write_columns_csv(out_dir / f"flux_{loc}.csv", "t_h", t_h, fluxes))
        files.append(report.plot_lines(out_dir / "flux.svg", t_h, fluxes, "t [h]", flux_unit,
                                       f"flux at {loc}", reference=ref_label))

    # ε₂ は各ソルバー自身の節点で評価済み
    scored = [row for row in rows if row.get("eps2_profile") is not None]
    if scored:
        floor = {row["solver"]: np.maximum(row["eps2_profile"], 1e-16) for row in scored}
        xs = {row["solver"]: row["eps2_x"] for row in scored}
        files.append(report.plot_lines(out_dir / "error_profile.svg", xs, floor, "x* [-]",
                                       "eps2 [-]", "error profile", logy=True))

    if p.physics == "heat" and config.preset.reference == "spectral":
        files.extend(_emit_loads(out_dir, ctx, fluxes, mids, t_h))
    return files


def _emit_loads(out_dir: Path, ctx: CaseContext, fluxes: Dict[str, np.ndarray], mids: Dict[str, np.ndarray],
                t_h: np.ndarray) -> List[Path]:
    """日・月ごとの伝導負荷と平均温度（年間ケース）"""
    t_s = t_h * 3600.0
    files = []
    for period in ("daily", "monthly"):
        loads = {k: daily_loads(FluxSeries(t_samples=t_s, q=q, location=ctx.problem.L * ctx.x0_star), period)
                 for k, q in fluxes.items()}
        # J/m² → kWh/m²
        loads = {k: w.model_copy(update={"values": w.values / 3.6e6}) for k, w in loads.items()}
        means = {k: aggregate(t_s, m, period) for k, m in mids.items()}
        files.append(report.write_windows_csv(out_dir / f"loads_{period}.csv", "kWh/m2", loads))
        files.append(report.write_windows_csv(out_dir / f"means_{period}.csv", "degC", means))
        files.append(report.plot_bars(out_dir / f"loads_{period}.svg", loads, "kWh/m2",
                                      f"{period} conduction loads"))
    return files


def run_case(config: RunConfig, jobs: Optional[int] = None) -> BenchReport:
    """全ソルバーを実行・採点し、結果ファイルを書き出す"""
    jobs = resolve_jobs(jobs, config.jobs)
    out_dir = init_output_dir(config.io.output_dir)
    ctx = build_context(config)
    logger.info("[BENCH] case=%s fo=%.6g tau*=%.6g solvers=%d", config.case, ctx.dimless.fo,
                ctx.dimless.tau_star, len(config.solver_list()))
    outcomes = run_solvers(config, ctx, jobs)

    certificate = None
    ref = None
    try:
        ref, certificate = reference_for(config, ctx, outcomes)
    except DifftrioError as e:
        logger.error("[BENCH] reference unavailable: %s", e.detail)
        certificate = getattr(e, "certificate", None)
        rows = [{"solver": o.label, "status": f"failed:{type(e).__name__}", "detail": e.detail}
                for o in outcomes]
    else:
        rows = [score(o, ref, ctx) for o in outcomes]

    files = emit_outputs(out_dir, config, ctx, outcomes, ref, rows)
    if certificate is not None:
        files.append(report.write_json(out_dir / "certificate.json", certificate.model_dump()))
    result = BenchReport(case=config.case, rows=rows, certificate=certificate, files=[str(f) for f in files])
    logger.info("[BENCH] done: %d solvers, %d failed", len(rows), result.n_failed)
    return result


class SweepRow(BaseModel):
    r: int
    field_eps_inf: float = math.nan
    flux_eps_inf: float = math.nan
    status: str = "ok"


class SweepResult(BaseModel):
    """スイープ結果と、閾値を初めて下回る抵抗数"""
    case: str
    rows: List[SweepRow]
    field_threshold: float
    flux_threshold: float
    field_r_min: Optional[int] = None
    flux_r_min: Optional[int] = None


def minimal_resistances(rows: List[SweepRow], attr: Literal["field_eps_inf", "flux_eps_inf"],
                        threshold: float) -> Optional[int]:
    """ε∞ が閾値を初めて下回る r（該当なしは None）"""
    for row in rows:
        if row.status == "ok" and getattr(row, attr) < threshold:
            return row.r
    return None


def sweep_resistances(config: RunConfig, r_values: Optional[List[int]] = None,
                      jobs: Optional[int] = None) -> SweepResult:
    """抵抗数 r を変えたときの ε∞（場・流束）"""
    r_values = list(r_values or config.sweep_r or config.preset.sweep_r)
    if not r_values:
        raise ConfigurationError("sweep needs at least one r value")
    if any(r < 2 for r in r_values) or any(b <= a for a, b in zip(r_values, r_values[1:])):
        raise ConfigurationError(f"sweep r values must be ascending and >= 2: {r_values}")
    jobs = resolve_jobs(jobs, config.jobs)
    out_dir = init_output_dir(config.io.output_dir)
    ctx = build_context(config)
    specs = [SolverSpec(kind="rc", r=r) for r in r_values]
    outcomes = run_solvers(config, ctx, jobs, specs)
    ref, certificate = reference_for(config, ctx, outcomes)

    rows: List[SweepRow] = []
    for r, outcome in zip(r_values, outcomes):
        scored = score(outcome, ref, ctx)
        rows.append(SweepRow(r=r, field_eps_inf=scored.get("field_eps_inf", math.nan),
                             flux_eps_inf=scored.get("flux_eps_inf", math.nan), status=scored["status"]))
        logger.info("[SWEEP] r=%d field=%.3e flux=%.3e %s", r, rows[-1].field_eps_inf,
                    rows[-1].flux_eps_inf, rows[-1].status)

    preset = config.preset
    result = SweepResult(
        case=config.case, rows=rows,
        field_threshold=preset.sweep_field_threshold, flux_threshold=preset.sweep_flux_threshold,
        field_r_min=minimal_resistances(rows, "field_eps_inf", preset.sweep_field_threshold),
        flux_r_min=minimal_resistances(rows, "flux_eps_inf", preset.sweep_flux_threshold),
    )
    logger.info("[SWEEP] field < %.1e from r=%s, flux < %.1e from r=%s", result.field_threshold,
                result.field_r_min, result.flux_threshold, result.flux_r_min)

    report.write_columns_csv(out_dir / "sweep.csv", "r", r_values, {
        "field_eps_inf": np.array([row.field_eps_inf for row in rows]),
        "flux_eps_inf": np.array([row.flux_eps_inf for row in rows]),
    })
    report.write_json(out_dir / "sweep_summary.json", result.model_dump(exclude={"rows"}))
    report.plot_sweep(out_dir / "sweep.svg", r_values, [row.field_eps_inf for row in rows],
                      [row.flux_eps_inf for row in rows], f"{config.case}: error vs r",
                      thresholds=[result.field_threshold, result.flux_threshold])
    if certificate is not None:
        report.write_json(out_dir / "certificate.json", certificate.model_dump())
    return result


def certify(config: RunConfig) -> OracleCertificate:
    """参照解の認証のみを実行し certificate.json を書く"""
    if config.preset.reference != "oracle":
        raise ConfigurationError(f"case '{config.case}' is referenced against its spectral solution, not the oracle")
    out_dir = init_output_dir(config.io.output_dir)
    ctx = build_context(config)
    try:
        _, certificate = reference_solution(ctx.dimless, config.oracle, config.output.samples_per_unit,
                                            config.preset.n_cells)
    except DifftrioError as e:
        certificate = getattr(e, "certificate", None)
        if certificate is not None:
            report.write_json(out_dir / "certificate.json", certificate.model_dump())
        raise
    report.write_json(out_dir / "certificate.json", certificate.model_dump())
    return certificate
