"""
CSV and SVG emission for benchmark runs
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from settings import DIFFTRIO_SVG_HASHSALT  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = DIFFTRIO_SVG_HASHSALT

METRICS_COLUMNS = ["solver", "field_eps_inf", "flux_eps_inf", "scd", "r_cpu_ms_per_h", "status"]
EXTENDED_COLUMNS = METRICS_COLUMNS + ["flux_eps_inf_dimensional", "max_abs_deviation", "cpu_seconds", "detail"]


def fmt(v) -> str:
    """CSV 用の数値書式（欠損は空欄）"""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    logger.info("[IO] wrote %s", path)
    return path


def write_metrics_csv(rows: List[Dict], out_dir: Path, extended: bool = False) -> Path:
    """metrics.csv（extended=True なら metrics_extended.csv）"""
    columns = EXTENDED_COLUMNS if extended else METRICS_COLUMNS
    name = "metrics_extended.csv" if extended else "metrics.csv"
    return _write_rows(out_dir / name, columns, ([row.get(c) for c in columns] for row in rows))


def write_columns_csv(path: Path, first: str, axis, columns: Dict[str, np.ndarray]) -> Path:
    """1 列目を軸、残りをソルバーごとの列として書き出す"""
    labels = list(columns)
    data = [np.asarray(columns[k]) for k in labels]
    rows = ([a] + [d[i] for d in data] for i, a in enumerate(np.asarray(axis)))
    return _write_rows(path, [first] + labels, rows)


def write_windows_csv(path: Path, unit_label: str, series: Dict[str, object]) -> Path:
    """ウィンドウ集計 (start_day, end_day, ソルバーごとの値)"""
    labels = list(series)
    first = series[labels[0]]
    rows = []
    for i in range(first.starts.size):
        rows.append([first.starts[i] / 86400.0, first.ends[i] / 86400.0] + [series[k].values[i] for k in labels])
    return _write_rows(path, ["start_day", "end_day"] + [f"{k} [{unit_label}]" for k in labels], rows)


def write_json(path: Path, payload: Dict) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("[IO] wrote %s", path)
    return path


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("[IO] wrote %s", path)
    return path


def plot_lines(path: Path, x, series: Dict[str, np.ndarray], xlabel: str, ylabel: str, title: str,
               logy: bool = False, reference: Optional[str] = None) -> Path:
    """折れ線グラフ（参照解は黒の破線、x は共通配列またはラベルごとの dict）"""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, y in series.items():
        style = {"color": "k", "linestyle": "--", "linewidth": 1.5} if label == reference else {"linewidth": 1.0}
        ax.plot(x[label] if isinstance(x, dict) else x, y, label=label, **style)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_bars(path: Path, series: Dict[str, object], ylabel: str, title: str) -> Path:
    """ウィンドウごとの棒グラフ（ソルバーごとに横並び）"""
    labels = list(series)
    count = series[labels[0]].values.size
    width = 0.8 / max(1, len(labels))
    fig, ax = plt.subplots(figsize=(max(7, count * 0.25), 4))
    idx = np.arange(count)
    for k, label in enumerate(labels):
        ax.bar(idx + k * width, series[label].values, width=width, label=label)
    ax.set_xlabel("window")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_sweep(path: Path, r_values, field_errors, flux_errors, title: str,
               thresholds: Optional[Sequence[float]] = None) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.loglog(r_values, field_errors, "o-", label="field eps_inf")
    ax.loglog(r_values, flux_errors, "s-", label="flux eps_inf")
    for level, color in zip(thresholds or [], ("C0", "C1")):
        ax.axhline(level, color=color, linestyle=":", linewidth=1.0)
    ax.set_xlabel("number of resistances r")
    ax.set_ylabel("eps_inf")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)
