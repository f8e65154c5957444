"""Decile long-short strategy engine with a random-noise baseline.

Each entry year opens an equal-weighted cohort (long the top signal decile,
short the bottom) drawn from the most-populous universe, marked annually on
the price index and held for the strategy horizon. Overlapping cohorts split
capital equally: the portfolio's year return is the average of the active
cohorts' returns. The baseline re-runs the identical machinery a thousand
times with standard-normal noise as the signal; on complete index grids it
takes a vectorized path that reproduces the general engine's decisions
exactly.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .econometrics import InsufficientDataError
from .panel import FLOW, Panel

BASELINE_PERCENTILES = (5, 25, 50, 75, 95)


@dataclass(frozen=True)
class StrategySpec:
    """One long-short experiment: signal, universe, horizon, leg fraction."""

    signal: Panel
    universe: Mapping[int, tuple[str, ...]]
    horizon: int
    fraction: float = 0.1
    seed: int | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.fraction <= 0.5):
            raise ValueError("fraction must be in (0, 0.5]")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass(frozen=True)
class Cohort:
    entry_year: int
    long: tuple[str, ...]
    short: tuple[str, ...]
    degenerate: bool = False


@dataclass(frozen=True)
class BacktestResult:
    """NAV path with summary metrics and per-cohort diagnostics.

    ``years[0]`` is the start mark (NAV exactly 1); ``annual_returns[i]`` is
    the portfolio return over ``years[i] -> years[i+1]``. ``sharpe`` is None
    (with a flag) when the return standard deviation is zero.
    """

    years: tuple[int, ...]
    nav: tuple[float, ...]
    annual_returns: tuple[float, ...]
    cagr: float | None
    sharpe: float | None
    cohorts: tuple[Cohort, ...]
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "years": list(self.years),
            "nav": list(self.nav),
            "annual_returns": list(self.annual_returns),
            "cagr": self.cagr,
            "sharpe": self.sharpe,
            "flags": list(self.flags),
            "cohorts": [
                {
                    "entry_year": c.entry_year,
                    "long": list(c.long),
                    "short": list(c.short),
                    "degenerate": c.degenerate,
                }
                for c in self.cohorts
            ],
        }


@dataclass
class BaselineSummary:
    """Distribution of the random-noise portfolios."""

    years: tuple[int, ...]
    nav_bands: dict[int, tuple[float, ...]]  # percentile -> NAV path
    terminal_navs: np.ndarray
    cagrs: np.ndarray
    sharpes: np.ndarray  # NaN where undefined
    flags: tuple[str, ...] = ()

    @property
    def median_terminal_nav(self) -> float:
        return float(np.median(self.terminal_navs))

    def percentile_rank(self, cagr: float) -> float:
        """Share of baseline CAGRs strictly below ``cagr``, in [0, 100]."""
        return float(100.0 * np.mean(self.cagrs < cagr))

    def cagr_percentile(self, q: float) -> float:
        return float(np.percentile(self.cagrs, q))


# ----------------------------------------------------------------------
# Universe and cohort construction
# ----------------------------------------------------------------------


def build_universe(
    population: Panel,
    size: int,
    years: Iterable[int],
    tally: Counter | None = None,
) -> dict[int, tuple[str, ...]]:
    """Top ``size`` areas by population for each entry year.

    Uses each area's most recent population at or before the entry year;
    ties break toward the lower area code. Years with fewer candidates than
    ``size`` keep every candidate and are flagged in ``tally``.
    """
    if size < 1:
        raise ValueError("universe size must be >= 1")
    by_area = population.by_area()
    out: dict[int, tuple[str, ...]] = {}
    for year in sorted(set(years)):
        pool: list[tuple[float, str]] = []
        for area, series in by_area.items():
            known = [y for y in series if y <= year]
            if not known:
                continue
            pool.append((series[max(known)], area))
        pool.sort(key=lambda item: (-item[0], item[1]))
        if len(pool) < size and tally is not None:
            tally["build_universe.short_universe"] += 1
        out[year] = tuple(area for _, area in pool[:size])
    return out


def _rank_order(areas: Sequence[str], values: np.ndarray) -> np.ndarray:
    """Indices sorted by descending value, ties toward the lower area code."""
    # stable sort on -values preserves the caller's area-sorted order on ties
    return np.argsort(-values, kind="stable")


def rank_cohort(
    signal: Panel,
    universe: Sequence[str],
    entry_year: int,
    fraction: float = 0.1,
) -> Cohort:
    """Split the universe into top/bottom signal legs for one entry year.

    Legs hold ceil(fraction * len(universe)) areas each, ranked by signal
    with area-code tie-breaks. Raises :class:`InsufficientDataError` when too
    few universe members have a signal value.
    """
    if not (0.0 < fraction <= 0.5):
        raise ValueError("fraction must be in (0, 0.5]")
    n_leg = math.ceil(fraction * len(universe))
    available = sorted(a for a in set(universe) if (a, entry_year) in signal.data)
    if len(available) < 2 * n_leg:
        raise InsufficientDataError(
            f"entry {entry_year}: signal covers {len(available)} of {len(universe)} "
            f"universe areas; need at least {2 * n_leg}"
        )
    values = np.array([signal.data[(a, entry_year)] for a in available])
    order = _rank_order(available, values)
    long = tuple(sorted(available[i] for i in order[:n_leg]))
    short = tuple(sorted(available[i] for i in order[-n_leg:]))
    degenerate = values[order[n_leg - 1]] <= values[order[-n_leg]]
    return Cohort(entry_year=entry_year, long=long, short=short, degenerate=bool(degenerate))


# ----------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------


class _MarketView:
    """Index panel flattened to a (years x areas) value matrix."""

    def __init__(self, index: Panel):
        self.years = index.years()
        self.areas = index.areas()
        self.year_pos = {y: i for i, y in enumerate(self.years)}
        self.area_pos = {a: i for i, a in enumerate(self.areas)}
        self.values = np.full((len(self.years), len(self.areas)), np.nan)
        for (area, year), value in index.data.items():
            self.values[self.year_pos[year], self.area_pos[area]] = value

    @property
    def max_year(self) -> int:
        return self.years[-1]

    @property
    def is_complete_grid(self) -> bool:
        contiguous = self.years == list(range(self.years[0], self.years[-1] + 1))
        return contiguous and not np.isnan(self.values).any()

    def leg_matrix(self, areas: Sequence[str], start: int, end: int) -> np.ndarray:
        """Values for ``areas`` over calendar years [start, end], NaN-padded."""
        out = np.full((end - start + 1, len(areas)), np.nan)
        cols = np.array([self.area_pos.get(a, -1) for a in areas])
        have = cols >= 0
        for i, year in enumerate(range(start, end + 1)):
            row = self.year_pos.get(year)
            if row is not None:
                out[i, have] = self.values[row, cols[have]]
        return out


def _leg_year_returns(values: np.ndarray, flags: list[str], label: str) -> np.ndarray:
    """Per-year equal-weighted leg returns with the mark-at-last rule.

    ``values`` is (n_years x n_positions) index levels starting at the entry
    year. A position missing for one year is marked at its last value (zero
    return, flagged); missing for a second consecutive year it is dropped
    from the leg for the remainder of the hold.
    """
    if not np.isnan(values).any():
        rets = values[1:] / values[:-1] - 1.0
        return rets.mean(axis=1)

    n_years, n_pos = values.shape
    returns = np.full((n_years - 1, n_pos), np.nan)
    for j in range(n_pos):
        if np.isnan(values[0, j]):
            flags.append(f"{label}: position missing at entry, excluded")
            continue
        last = values[0, j]
        stale = 0
        for i in range(1, n_years):
            v = values[i, j]
            if np.isnan(v):
                stale += 1
                if stale == 1:
                    returns[i - 1, j] = 0.0
                    flags.append(f"{label}: marked at last value in year offset {i}")
                else:
                    flags.append(f"{label}: dropped after repeated missing marks")
                    break
            else:
                returns[i - 1, j] = v / last - 1.0
                last = v
                stale = 0
    out = np.full(n_years - 1, np.nan)
    for i in range(n_years - 1):
        live = returns[i][~np.isnan(returns[i])]
        if live.size:
            out[i] = live.mean()
    return out


def _summarize(years: list[int], annual_returns: list[float], flags: list[str], cohorts: list[Cohort]) -> BacktestResult:
    nav = [1.0]
    for r in annual_returns:
        nav.append(nav[-1] * (1.0 + r))
    n_years = len(annual_returns)
    cagr = nav[-1] ** (1.0 / n_years) - 1.0 if n_years else None
    returns_arr = np.array(annual_returns)
    if n_years >= 2 and returns_arr.std(ddof=1) > 0.0:
        sharpe: float | None = float(returns_arr.mean() / returns_arr.std(ddof=1))
    else:
        sharpe = None
        flags.append("sharpe undefined: zero return variance")
    return BacktestResult(
        years=tuple(years),
        nav=tuple(nav),
        annual_returns=tuple(annual_returns),
        cagr=cagr,
        sharpe=sharpe,
        cohorts=tuple(cohorts),
        flags=tuple(flags),
    )


def run_long_short(
    spec: StrategySpec,
    index: Panel,
    tally: Counter | None = None,
) -> BacktestResult:
    """Simulate the annually re-marked long-short strategy.

    Entry years are those universe years with sufficient signal coverage and
    at least one subsequent index year; insufficient coverage skips the entry
    with a flag rather than aborting.
    """
    view = _MarketView(index)
    return _run_with_view(spec, view, tally)


def _run_with_view(spec: StrategySpec, view: _MarketView, tally: Counter | None = None) -> BacktestResult:
    flags: list[str] = []
    cohorts: list[Cohort] = []
    for year in sorted(spec.universe):
        if year >= view.max_year:
            continue
        try:
            cohorts.append(rank_cohort(spec.signal, spec.universe[year], year, spec.fraction))
        except InsufficientDataError as exc:
            flags.append(f"entry {year} skipped: {exc}")
            if tally is not None:
                tally["run_long_short.entry_skipped"] += 1
    if not cohorts:
        raise InsufficientDataError("no entry year has sufficient signal coverage")

    start = cohorts[0].entry_year
    end = min(view.max_year, max(c.entry_year + spec.horizon for c in cohorts))
    years = list(range(start, end + 1))

    cohort_returns: dict[int, dict[int, float]] = {}
    for cohort in cohorts:
        if cohort.degenerate:
            flags.append(f"entry {cohort.entry_year}: degenerate cohort (signal ties across legs)")
        hold_end = min(cohort.entry_year + spec.horizon, end)
        long_values = view.leg_matrix(cohort.long, cohort.entry_year, hold_end)
        short_values = view.leg_matrix(cohort.short, cohort.entry_year, hold_end)
        long_returns = _leg_year_returns(long_values, flags, f"entry {cohort.entry_year} long")
        short_returns = _leg_year_returns(short_values, flags, f"entry {cohort.entry_year} short")
        spread = long_returns - short_returns
        cohort_returns[cohort.entry_year] = {
            cohort.entry_year + 1 + i: float(spread[i])
            for i in range(len(spread))
            if not np.isnan(spread[i])
        }

    annual_returns: list[float] = []
    for year in years[1:]:
        active = [rets[year] for rets in cohort_returns.values() if year in rets]
        if active:
            annual_returns.append(float(np.mean(active)))
        else:
            annual_returns.append(0.0)
            flags.append(f"year {year}: no active cohort, NAV flat")

    return _summarize(years, annual_returns, flags, cohorts)


def _noise_signal(rng: np.random.Generator, universe: Mapping[int, tuple[str, ...]]) -> Panel:
    """Standard-normal signal over the universe, drawn in sorted-key order."""
    noise: dict[tuple[str, int], float] = {}
    for year in sorted(universe):
        members = sorted(universe[year])
        draws = rng.standard_normal(len(members))
        for area, value in zip(members, draws):
            noise[(area, year)] = float(value)
    return Panel(name="noise", data=noise, unit="z", kind=FLOW)


def random_baseline(
    spec: StrategySpec,
    index: Panel,
    n_portfolios: int = 1000,
    tally: Counter | None = None,
) -> BaselineSummary:
    """Distribution of the strategy under i.i.d. standard-normal signals.

    Portfolio i draws its noise signal from a generator seeded ``seed + i``;
    every other condition matches the factor strategy.
    """
    if spec.seed is None:
        raise ValueError("random_baseline requires StrategySpec.seed")
    if n_portfolios < 1:
        raise ValueError("n_portfolios must be >= 1")
    view = _MarketView(index)
    fast = view.is_complete_grid and all(
        view.years[0] <= y < view.max_year for y in spec.universe
    )

    years_grid: tuple[int, ...] | None = None
    nav_paths: list[np.ndarray] = []
    cagrs = np.empty(n_portfolios)
    sharpes = np.full(n_portfolios, np.nan)
    terminal = np.empty(n_portfolios)
    flags: list[str] = []

    runner = _FastBaselineRunner(spec, view) if fast else None
    for i in range(n_portfolios):
        rng = np.random.default_rng(spec.seed + i)
        if runner is not None:
            result = runner.run(rng)
        else:
            noise_spec = StrategySpec(
                signal=_noise_signal(rng, spec.universe),
                universe=spec.universe,
                horizon=spec.horizon,
                fraction=spec.fraction,
                seed=spec.seed,
            )
            result = _run_with_view(noise_spec, view)
        if years_grid is None:
            years_grid = result.years
        elif result.years != years_grid:
            raise RuntimeError("baseline portfolios produced inconsistent year grids")
        nav_paths.append(np.array(result.nav))
        terminal[i] = result.nav[-1]
        cagrs[i] = result.cagr if result.cagr is not None else 0.0
        if result.sharpe is not None:
            sharpes[i] = result.sharpe

    nav_matrix = np.vstack(nav_paths)
    bands = {
        q: tuple(float(v) for v in np.percentile(nav_matrix, q, axis=0))
        for q in BASELINE_PERCENTILES
    }
    if np.isnan(sharpes).any():
        flags.append(f"{int(np.isnan(sharpes).sum())} baseline portfolios with undefined sharpe")

    assert years_grid is not None
    return BaselineSummary(
        years=years_grid,
        nav_bands=bands,
        terminal_navs=terminal,
        cagrs=cagrs,
        sharpes=sharpes,
        flags=tuple(flags),
    )


class _FastBaselineRunner:
    """Vectorized noise-portfolio simulation for complete index grids.

    Precomputes per-year return rows and universe column indices so each
    portfolio costs one normal draw and one argsort per entry year. Decisions
    match the general engine: same draw order (area-sorted), same descending
    stable ranking, same cohort averaging.
    """

    def __init__(self, spec: StrategySpec, view: _MarketView):
        self.horizon = spec.horizon
        self.entry_years = [y for y in sorted(spec.universe) if y < view.max_year]
        if not self.entry_years:
            raise InsufficientDataError("no entry year precedes the last index year")
        self.start = self.entry_years[0]
        self.end = min(view.max_year, max(self.entry_years) + spec.horizon)
        self.years = list(range(self.start, self.end + 1))
        returns = view.values[1:] / view.values[:-1] - 1.0
        self.return_rows = {view.years[i + 1]: returns[i] for i in range(len(returns))}
        self.prep = []
        for year in self.entry_years:
            members = sorted(spec.universe[year])
            n_leg = math.ceil(spec.fraction * len(spec.universe[year]))
            if len(members) < 2 * n_leg:
                raise InsufficientDataError(f"entry {year}: universe too small for two legs")
            cols = np.array([view.area_pos[a] for a in members])
            self.prep.append((year, cols, n_leg))

    def run(self, rng: np.random.Generator) -> BacktestResult:
        spreads: dict[int, list[float]] = {}
        for year, cols, n_leg in self.prep:
            draws = rng.standard_normal(len(cols))
            order = np.argsort(-draws, kind="stable")
            long_cols = cols[order[:n_leg]]
            short_cols = cols[order[-n_leg:]]
            for s in range(year + 1, min(year + self.horizon, self.end) + 1):
                row = self.return_rows[s]
                spreads.setdefault(s, []).append(float(row[long_cols].mean() - row[short_cols].mean()))
        annual_returns = [float(np.mean(spreads[y])) if y in spreads else 0.0 for y in self.years[1:]]
        return _summarize(self.years, annual_returns, [], [])
