"""
Boundary-condition CSV contract, synthetic annual surface temperatures and initial profiles
"""
import csv
import io
import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.ndimage import gaussian_filter1d

from errors import IngestionError
from models import BoundarySignal

logger = logging.getLogger(__name__)

HEADER = ["time_s", "left", "right"]
UNITS_PREFIX = "# units:"
HOURS_PER_YEAR = 8760
SECONDS_PER_DAY = 86400.0


class BcCsv(BaseModel):
    """境界条件の時系列 (time_s, left, right)"""
    model_config = ConfigDict(frozen=True)

    times: List[float]
    left: List[float]
    right: List[float]
    units: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if not len(self.times) == len(self.left) == len(self.right):
            raise IngestionError("time_s, left and right columns differ in length")
        return self

    def __len__(self) -> int:
        return len(self.times)


def format_value(v: float) -> str:
    """数値の書式（整数値は整数表記、それ以外は最短の往復可能表記）"""
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def dumps_bc_csv(bc: BcCsv) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    if bc.units is not None:
        buf.write(f"{UNITS_PREFIX} {bc.units}\n")
    for t, a, b in zip(bc.times, bc.left, bc.right):
        writer.writerow([format_value(t), format_value(a), format_value(b)])
    return buf.getvalue()


def write_bc_csv(bc: BcCsv, path: Union[str, Path]) -> Path:
    """UTF-8・LF 改行で書き出す"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(dumps_bc_csv(bc))
    logger.info("[IO] wrote %d boundary rows to %s", len(bc), path)
    return path


def _parse_float(token: str, row: int, column: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise IngestionError(f"column '{column}' is not a number: {token!r}", row=row)
    if not math.isfinite(value):
        raise IngestionError(f"column '{column}' is not finite: {token!r}", row=row)
    return value


def read_bc_csv(path: Union[str, Path], max_gap_factor: float = 2.0) -> BcCsv:
    """スキーマ・単調性・欠測ギャップを検査して読み込む（行番号はファイルの行）"""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"boundary CSV not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        text = f.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != ",".join(HEADER):
        raise IngestionError(f"header must be '{','.join(HEADER)}'", row=1)

    units = None
    times: List[float] = []
    left: List[float] = []
    right: List[float] = []
    rows: List[int] = []
    for number, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            if number == 2 and line.startswith(UNITS_PREFIX):
                units = line[len(UNITS_PREFIX):].strip()
                continue
            raise IngestionError("comment lines are only allowed as '# units:' after the header", row=number)
        if "\r" in line:
            raise IngestionError("line endings must be LF", row=number)
        fields = next(csv.reader([line]))
        if len(fields) != 3:
            raise IngestionError(f"expected 3 columns, got {len(fields)}", row=number)
        t = _parse_float(fields[0], number, "time_s")
        if times and t <= times[-1]:
            raise IngestionError(f"time_s not strictly increasing ({t} after {times[-1]})", row=number)
        times.append(t)
        left.append(_parse_float(fields[1], number, "left"))
        right.append(_parse_float(fields[2], number, "right"))
        rows.append(number)

    if len(times) < 2:
        raise IngestionError("boundary CSV needs at least two data rows")
    gaps = np.diff(times)
    limit = max_gap_factor * float(np.median(gaps))
    too_big = np.flatnonzero(gaps > limit * (1 + 1e-12))
    if too_big.size:
        k = int(too_big[0]) + 1
        raise IngestionError(f"gap of {gaps[k - 1]:.6g} s exceeds {limit:.6g} s", row=rows[k])
    return BcCsv(times=times, left=left, right=right, units=units)


def ingest_bc_csv(path: Union[str, Path], discard_days: float = 0.0,
                  max_gap_factor: float = 2.0) -> Tuple[BoundarySignal, BoundarySignal]:
    """CSV を 2 本の境界信号に変換（先頭 discard_days 日は捨て、時刻は 0 から）"""
    bc = read_bc_csv(path, max_gap_factor)
    return signals_from_bc(bc, discard_days)


def signals_from_bc(bc: BcCsv, discard_days: float = 0.0) -> Tuple[BoundarySignal, BoundarySignal]:
    t = np.asarray(bc.times, dtype=float)
    start = t[0] + discard_days * SECONDS_PER_DAY
    keep = t >= start - 1e-9
    if np.count_nonzero(keep) < 2:
        raise IngestionError(f"discarding {discard_days} days leaves fewer than two samples")
    t_kept = t[keep] - t[keep][0]
    left = BoundarySignal.sampled(t_kept, np.asarray(bc.left)[keep])
    right = BoundarySignal.sampled(t_kept, np.asarray(bc.right)[keep])
    if discard_days:
        logger.info("[IO] discarded first %g days (%d samples)", discard_days, int(np.count_nonzero(~keep)))
    return left, right


class SurfaceClimate(BaseModel):
    """合成表面温度の形状パラメータ [°C]"""
    model_config = ConfigDict(frozen=True)

    mean: float
    annual_amplitude: float = Field(ge=0)
    daily_amplitude: float = Field(ge=0)
    noise_amplitude: float = Field(ge=0)
    peak_day: float = 225.0          # 年周期の極大日
    daily_peak_hour: float = 15.0
    noise_sigma_hours: float = 6.0   # ノイズ平滑化の幅

    @property
    def bound(self) -> float:
        return self.annual_amplitude + self.daily_amplitude + self.noise_amplitude


# 外表面（左）と内表面（右）
OUTER_SURFACE = SurfaceClimate(mean=14.0, annual_amplitude=7.0, daily_amplitude=4.0, noise_amplitude=1.5)
INNER_SURFACE = SurfaceClimate(mean=19.0, annual_amplitude=3.0, daily_amplitude=1.0, noise_amplitude=0.5)


def _synth_series(climate: SurfaceClimate, hours: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    days = hours / 24.0
    annual = climate.annual_amplitude * np.cos(2.0 * math.pi * (days - climate.peak_day) / 365.0)
    daily = climate.daily_amplitude * np.cos(2.0 * math.pi * (hours - climate.daily_peak_hour) / 24.0)
    noise = gaussian_filter1d(rng.standard_normal(hours.size), climate.noise_sigma_hours, mode="wrap")
    peak = float(np.max(np.abs(noise)))
    if peak > 0:
        noise *= climate.noise_amplitude / peak
    return climate.mean + annual + daily + noise


def synth_annual_bc(seed: int, hours: int = HOURS_PER_YEAR) -> BcCsv:
    """1 年分の毎時表面温度（年周期 + 日周期 + 平滑化ノイズ、seed で決定的）"""
    rng = np.random.default_rng(seed)
    h = np.arange(hours, dtype=float)
    left = np.round(_synth_series(OUTER_SURFACE, h, rng), 3)
    right = np.round(_synth_series(INNER_SURFACE, h, rng), 3)
    return BcCsv(times=(h * 3600.0).tolist(), left=left.tolist(), right=right.tolist(), units="s, degC, degC")


class LinearProfile(BaseModel):
    """両端値を結ぶ一次分布（初期条件）"""
    model_config = ConfigDict(frozen=True)

    left_value: float
    right_value: float
    length: float = Field(gt=0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s = x / self.length
        return (1.0 - s) * self.left_value + s * self.right_value


def init_linear_profile(left_value: float, right_value: float, length: float) -> LinearProfile:
    return LinearProfile(left_value=left_value, right_value=right_value, length=length)
