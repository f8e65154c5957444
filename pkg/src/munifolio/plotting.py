"""Static report figures rendered straight to image files.

Every CLI report path pairs its delimited output with a PNG so results can
be eyeballed without loading the CSVs. Rendering is non-interactive (Agg)
and deterministic.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .backtest import BacktestResult, BaselineSummary  # noqa: E402
from .forecaster import DecileReport  # noqa: E402
from .panel import Panel  # noqa: E402
from .signals import LinearEvalReport  # noqa: E402

DPI = 150


def _save(fig: plt.Figure, path: str | Path) -> None:
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)


def plot_index_series(index: Panel, path: str | Path, areas: Sequence[str] | None = None, max_areas: int = 8) -> None:
    """Index level over time for a handful of municipalities."""
    by_area = index.by_area()
    chosen = list(areas) if areas is not None else sorted(by_area)[:max_areas]
    fig, ax = plt.subplots(figsize=(9, 5))
    for area in chosen:
        series = by_area.get(area, {})
        years = sorted(series)
        ax.plot(years, [series[y] for y in years], label=area, linewidth=1.5)
    ax.set_xlabel("Year")
    ax.set_ylabel("Price index (base = 100)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    _save(fig, path)


def plot_linear_eval(report: LinearEvalReport, path: str | Path) -> None:
    """Scatter of trailing factor growth vs. forward returns with the fit line."""
    xs = [row[2] for row in report.scatter]
    ys = [row[3] for row in report.scatter]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(xs, ys, s=8, alpha=0.35, edgecolors="none")
    if xs:
        lo, hi = min(xs), max(xs)
        ax.plot(
            [lo, hi],
            [report.intercept + report.slope * lo, report.intercept + report.slope * hi],
            color="crimson",
            linewidth=1.5,
        )
    ax.set_xlabel(f"{report.factor_name}: trailing 3y cumulative growth")
    ax.set_ylabel(f"{report.horizon}y forward return")
    ax.set_title(
        f"Horizon: {report.horizon}y - R2: {report.r_squared:.3f}; Coef: {report.slope:.4f}; n={report.n_obs}"
    )
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_backtest(result: BacktestResult, baseline: BaselineSummary | None, path: str | Path, title: str = "") -> None:
    """Strategy NAV against the random-baseline percentile bands."""
    fig, ax = plt.subplots(figsize=(9, 5))
    if baseline is not None:
        years = baseline.years
        ax.fill_between(years, baseline.nav_bands[5], baseline.nav_bands[95], alpha=0.15, color="gray", label="baseline 5-95%")
        ax.fill_between(years, baseline.nav_bands[25], baseline.nav_bands[75], alpha=0.25, color="gray", label="baseline 25-75%")
        ax.plot(years, baseline.nav_bands[50], color="gray", linewidth=1.0, label="baseline median")
    ax.plot(result.years, result.nav, color="navy", linewidth=2.0, label="strategy")
    cagr = "n/a" if result.cagr is None else f"{100 * result.cagr:.2f}%"
    sharpe = "n/a" if result.sharpe is None else f"{result.sharpe:.2f}"
    ax.set_title(f"{title} CAGR: {cagr}; Sharpe: {sharpe}".strip())
    ax.set_xlabel("Year")
    ax.set_ylabel("NAV")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_training_history(history: Sequence[Mapping], path: str | Path) -> None:
    epochs = [row["epoch"] for row in history]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(epochs, [row["train_loss"] for row in history], label="train", linewidth=1.5)
    if history and "test_loss" in history[0]:
        ax.plot(epochs, [row.get("test_loss") for row in history], label="test", linewidth=1.5)
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Weighted MSE")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_decile_trajectories(report: DecileReport, variable: str, path: str | Path) -> None:
    """Per-variable input trajectories, top decile dark, bottom light."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for traj in report.for_variable(variable):
        offsets = range(-len(traj.values) + 1, 1)
        color = "#08306b" if traj.group == "top" else "#9ecae1"
        ax.plot(list(offsets), traj.values, color=color, alpha=0.7, linewidth=1.2)
    ax.set_xlabel("Years before anchor")
    ax.set_ylabel(variable)
    ax.set_title(f"{variable}: top (dark) vs bottom (light) output decile")
    ax.grid(True, alpha=0.3)
    _save(fig, path)
