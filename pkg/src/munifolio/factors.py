"""The five alternative-data factor panels and their backtest signals.

Each constructor emits a per-year factor panel tagged with its kind ("flow"
for per-period ratios, "level" for index-like series) and provenance. The
kind drives how the trailing cumulative-growth signal is formed: flows are
summed over the window, levels are compounded.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .panel import FLOW, LEVEL, Panel, interpolate_gaps, pct_change, trailing_cum_growth

FACTOR_NAMES = ("migration", "income", "dwellings", "mean_reversion", "neighbors")

# Centroids closer than this (km) share a weight floor so coincident points
# cannot blow up the 1/d weighting.
MIN_NEIGHBOR_DISTANCE_KM = 0.1


@dataclass(frozen=True)
class FactorPanel(Panel):
    """A factor panel: observations plus kind tag and provenance label."""

    provenance: str = ""

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.provenance:
            raise ValueError("FactorPanel requires a provenance label")


def _as_factor(panel: Panel, name: str, provenance: str) -> FactorPanel:
    return FactorPanel(
        name=name,
        data=dict(panel.data),
        unit=panel.unit,
        kind=panel.kind,
        provenance=provenance,
    )


def net_migration_ratio(
    in_mig: Panel,
    out_mig: Panel,
    population: Panel,
    tally: Counter | None = None,
) -> FactorPanel:
    """(in migrations - out migrations) / total population, per (year, area).

    Keys must be present in all three inputs; non-positive population drops
    the observation. Ratios outside (-1, 1) are kept but flagged.
    """
    data: dict[tuple[str, int], float] = {}
    for key in sorted(set(in_mig.data) & set(out_mig.data) & set(population.data)):
        pop = population.data[key]
        if pop <= 0:
            if tally is not None:
                tally["net_migration_ratio.bad_population"] += 1
            continue
        ratio = (in_mig.data[key] - out_mig.data[key]) / pop
        if not (-1.0 < ratio < 1.0) and tally is not None:
            tally["net_migration_ratio.out_of_range"] += 1
        data[key] = ratio
    return FactorPanel(
        name="net_migration_ratio",
        data=data,
        unit="ratio",
        kind=FLOW,
        provenance="(in - out) migrations over population",
    )


def taxable_income_growth(income: Panel, tally: Counter | None = None) -> FactorPanel:
    """Year-over-year growth of total taxable income."""
    grown = pct_change(income, 1, tally=tally)
    return _as_factor(grown, "taxable_income_growth", "yearly pct change of taxable income")


def new_dwellings_ratio(
    starts: Panel,
    stock_survey: Panel,
    max_gap: int = 5,
    tally: Counter | None = None,
) -> FactorPanel:
    """Annual construction starts over the interpolated dwelling stock.

    The stock survey arrives at five-year intervals; it is linearly
    interpolated (gaps beyond ``max_gap`` stay missing) before dividing.
    """
    stock = interpolate_gaps(stock_survey, max_gap=max_gap, tally=tally)
    data: dict[tuple[str, int], float] = {}
    for key in sorted(set(starts.data) & set(stock.data)):
        denominator = stock.data[key]
        if denominator <= 0:
            if tally is not None:
                tally["new_dwellings_ratio.bad_stock"] += 1
            continue
        data[key] = starts.data[key] / denominator
    return FactorPanel(
        name="new_dwellings_ratio",
        data=data,
        unit="ratio",
        kind=FLOW,
        provenance="new starts over interpolated dwelling stock",
    )


def historical_return_signal(index: Panel, window: int = 3, tally: Counter | None = None) -> FactorPanel:
    """Inverted cumulative price growth over a trailing window (mean reversion)."""
    growth = trailing_cum_growth(index.with_kind(LEVEL), window, tally=tally)
    data = {key: -value for key, value in growth.data.items()}
    return FactorPanel(
        name="mean_reversion_signal",
        data=data,
        unit="ratio",
        kind=FLOW,
        provenance=f"inverted {window}y cumulative price growth",
    )


def knn_neighbors(
    centroids: Mapping[str, tuple[float, float]],
    areas: Sequence[str],
    k: int,
) -> dict[str, tuple[tuple[str, float], ...]]:
    """k nearest other areas per area, by planar Euclidean distance.

    The neighbor set depends on geometry only. Ties are broken by area code
    so the result is deterministic regardless of input ordering.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(set(areas))
    missing = [a for a in ordered if a not in centroids]
    if missing:
        raise ValueError(f"areas without centroids: {missing}")
    coords = np.array([centroids[a] for a in ordered])
    out: dict[str, tuple[tuple[str, float], ...]] = {}
    for i, area in enumerate(ordered):
        deltas = coords - coords[i]
        dists = np.hypot(deltas[:, 0], deltas[:, 1])
        ranked = sorted(
            ((float(dists[j]), ordered[j]) for j in range(len(ordered)) if j != i),
        )
        out[area] = tuple((code, dist) for dist, code in ranked[:k])
    return out


def neighbor_return_factor(
    index: Panel,
    centroids: Mapping[str, tuple[float, float]],
    k: int = 5,
    min_distance: float = MIN_NEIGHBOR_DISTANCE_KM,
    tally: Counter | None = None,
) -> FactorPanel:
    """Distance-weighted mean of the k nearest neighbours' yearly returns.

    Weights are 1/max(distance, ``min_distance``). Neighbours lacking a
    return in a given year drop out of that year's mean; with no neighbour
    data at all the observation is absent.
    """
    returns = pct_change(index, 1, tally=tally)
    by_area = returns.by_area()
    areas = index.areas()
    neighbor_map = knn_neighbors(centroids, areas, k)
    data: dict[tuple[str, int], float] = {}
    for area, series in index.by_area().items():
        neighbors = neighbor_map[area]
        for year in series:
            num = 0.0
            den = 0.0
            for code, dist in neighbors:
                r = by_area.get(code, {}).get(year)
                if r is None:
                    continue
                w = 1.0 / max(dist, min_distance)
                num += w * r
                den += w
            if den > 0.0:
                data[(area, year)] = num / den
            elif tally is not None:
                tally["neighbor_return_factor.no_neighbor_data"] += 1
    return FactorPanel(
        name="neighbor_return_factor",
        data=data,
        unit="ratio",
        kind=FLOW,
        provenance=f"1/d weighted mean of {k} nearest neighbours' yearly returns",
    )


# ----------------------------------------------------------------------
# Factor -> linear-model input and backtest signal
# ----------------------------------------------------------------------


def linear_model_input(
    name: str,
    index: Panel,
    panels: Mapping[str, Panel],
    centroids: Mapping[str, tuple[float, float]] | None = None,
    tally: Counter | None = None,
) -> Panel:
    """The panel whose trailing 3y cumulative growth is the regression x.

    For income and mean reversion this is the underlying level series
    (taxable income, the price index); for the ratio factors it is the
    per-year factor itself, which the flow rule then sums over the window.
    """
    if name == "migration":
        return net_migration_ratio(panels["in_migration"], panels["out_migration"], panels["population"], tally)
    if name == "income":
        return panels["taxable_income"].with_kind(LEVEL)
    if name == "dwellings":
        return new_dwellings_ratio(panels["new_starts"], panels["dwelling_stock"], tally=tally)
    if name == "mean_reversion":
        return index.with_kind(LEVEL)
    if name == "neighbors":
        if centroids is None:
            raise ValueError("neighbors factor requires centroids")
        return neighbor_return_factor(index, centroids, tally=tally)
    raise ValueError(f"unknown factor {name!r}; expected one of {FACTOR_NAMES}")


def build_signal(
    name: str,
    index: Panel,
    panels: Mapping[str, Panel],
    centroids: Mapping[str, tuple[float, float]] | None = None,
    window: int = 3,
    tally: Counter | None = None,
) -> Panel:
    """Trailing cumulative-growth ranking signal for one factor.

    Mean reversion inverts the cumulated price growth (long the laggards);
    every other factor goes long its highest trailing growth.
    """
    base = linear_model_input(name, index, panels, centroids, tally)
    signal = trailing_cum_growth(base, window, tally=tally)
    if name == "mean_reversion":
        signal = Panel(
            name="mean_reversion_signal",
            data={key: -value for key, value in signal.data.items()},
            unit="ratio",
            kind=FLOW,
        )
    return signal.rename(f"{name}_signal")
