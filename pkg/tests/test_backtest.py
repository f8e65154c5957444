"""Long-short engine and random-baseline tests."""

import math
import time
from collections import Counter

import numpy as np
import pytest

from munifolio.backtest import (
    StrategySpec,
    _FastBaselineRunner,
    _MarketView,
    _noise_signal,
    _run_with_view,
    build_universe,
    random_baseline,
    rank_cohort,
    run_long_short,
)
from munifolio.econometrics import InsufficientDataError
from munifolio.panel import FLOW, LEVEL, Panel


def flow(rows, name="signal"):
    return Panel.from_rows(name, rows, kind=FLOW)


def level(rows, name="index"):
    return Panel.from_rows(name, rows, kind=LEVEL)


def symmetric_market(seed=0, n_areas=60, n_years=12, vol=0.08):
    """Zero-drift market: i.i.d. symmetric annual returns."""
    rng = np.random.default_rng(seed)
    areas = [str(70000 + i) for i in range(n_areas)]
    years = list(range(2006, 2006 + n_years))
    rows = []
    for a in areas:
        lvl = 100.0
        for y in years:
            rows.append((y, a, lvl))
            lvl *= 1.0 + vol * rng.standard_normal()
            lvl = max(lvl, 1e-3)
    return level(rows), areas, years


def full_universe(areas, years):
    return {y: tuple(sorted(areas)) for y in years}


# ----------------------------------------------------------------------
# build_universe
# ----------------------------------------------------------------------


class TestBuildUniverse:
    def test_top_by_population(self):
        pop = level([(2010, "1", 10.0), (2010, "2", 20.0), (2010, "3", 30.0)], "pop")
        universe = build_universe(pop, 2, [2010])
        assert universe[2010] == ("00003", "00002")

    def test_tie_breaks_to_lower_code(self):
        pop = level([(2010, "1", 30.0), (2010, "2", 20.0), (2010, "3", 20.0)], "pop")
        universe = build_universe(pop, 2, [2010])
        assert universe[2010] == ("00001", "00002")

    def test_short_universe_keeps_all_and_warns(self):
        pop = level([(2010, "1", 10.0)], "pop")
        tally = Counter()
        universe = build_universe(pop, 5, [2010], tally)
        assert universe[2010] == ("00001",)
        assert tally["build_universe.short_universe"] == 1

    def test_uses_latest_population_at_or_before(self):
        pop = level([(2008, "1", 100.0), (2010, "1", 1.0), (2008, "2", 50.0)], "pop")
        assert build_universe(pop, 1, [2009])[2009] == ("00001",)
        assert build_universe(pop, 1, [2010])[2010] == ("00002",)


# ----------------------------------------------------------------------
# rank_cohort
# ----------------------------------------------------------------------


class TestRankCohort:
    def test_top_and_bottom(self):
        areas = [f"{i:05d}" for i in range(1, 11)]
        signal = flow([(2010, a, float(i)) for i, a in enumerate(areas, start=1)])
        cohort = rank_cohort(signal, areas, 2010, fraction=0.1)
        assert cohort.long == (areas[-1],)
        assert cohort.short == (areas[0],)
        assert not cohort.degenerate

    def test_all_equal_flagged_degenerate(self):
        areas = [f"{i:05d}" for i in range(1, 11)]
        signal = flow([(2010, a, 1.0) for a in areas])
        cohort = rank_cohort(signal, areas, 2010, fraction=0.1)
        assert cohort.degenerate
        assert set(cohort.long).isdisjoint(cohort.short)

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(8)
        areas = [f"{i:05d}" for i in range(1, 101)]
        values = {a: float(rng.normal()) for a in areas}
        signal = flow([(2012, a, v) for a, v in values.items()])
        cohort = rank_cohort(signal, areas, 2012, fraction=0.1)
        ordered = sorted(areas, key=lambda a: (-values[a], a))
        assert set(cohort.long) == set(ordered[:10])
        assert set(cohort.short) == set(ordered[-10:])

    def test_insufficient_coverage_lists_counts(self):
        areas = [f"{i:05d}" for i in range(1, 11)]
        signal = flow([(2010, areas[0], 1.0)])
        with pytest.raises(InsufficientDataError, match="covers 1 of 10"):
            rank_cohort(signal, areas, 2010, fraction=0.1)

    def test_sets_disjoint_by_construction(self):
        areas = [f"{i:05d}" for i in range(1, 7)]
        signal = flow([(2010, a, float(i % 2)) for i, a in enumerate(areas)])
        cohort = rank_cohort(signal, areas, 2010, fraction=0.5)
        assert set(cohort.long).isdisjoint(cohort.short)
        assert len(cohort.long) == len(cohort.short) == 3


# ----------------------------------------------------------------------
# run_long_short
# ----------------------------------------------------------------------


class TestRunLongShort:
    def test_flat_market_flags_undefined_sharpe(self):
        areas = [f"{i:05d}" for i in range(1, 11)]
        years = list(range(2006, 2012))
        index = level([(y, a, 100.0) for a in areas for y in years])
        signal = flow([(2006, a, float(i)) for i, a in enumerate(areas)])
        spec = StrategySpec(signal=signal, universe={2006: tuple(areas)}, horizon=2)
        result = run_long_short(spec, index)
        assert all(r == 0.0 for r in result.annual_returns)
        assert result.cagr == pytest.approx(0.0)
        assert result.sharpe is None
        assert any("sharpe undefined" in f for f in result.flags)

    def test_single_cohort_arithmetic(self):
        # long area grows 10%/yr, short flat: NAV 1.10 then 1.21
        index = level(
            [(2006, "1", 100.0), (2007, "1", 110.0), (2008, "1", 121.0)]
            + [(2006, "2", 100.0), (2007, "2", 100.0), (2008, "2", 100.0)]
        )
        signal = flow([(2006, "1", 1.0), (2006, "2", -1.0)])
        spec = StrategySpec(signal=signal, universe={2006: ("00001", "00002")}, horizon=2, fraction=0.5)
        result = run_long_short(spec, index)
        assert result.nav == pytest.approx((1.0, 1.10, 1.21))
        assert result.cagr == pytest.approx(0.10)

    def test_overlapping_cohorts_average(self):
        # two cohorts active in 2008: returns are averaged with equal capital
        areas = ("00001", "00002")
        index = level(
            [(2006, "1", 100.0), (2007, "1", 110.0), (2008, "1", 121.0)]
            + [(2006, "2", 100.0), (2007, "2", 100.0), (2008, "2", 100.0)]
        )
        signal = flow([(y, "1", 1.0) for y in (2006, 2007)] + [(y, "2", -1.0) for y in (2006, 2007)])
        spec = StrategySpec(signal=signal, universe={y: areas for y in (2006, 2007)}, horizon=2, fraction=0.5)
        result = run_long_short(spec, index)
        # both cohorts hold long=1 short=2, so the average equals the single-cohort return
        assert result.annual_returns == pytest.approx((0.10, 0.10))

    def test_market_neutrality_constant_shift(self):
        index, areas, years = symmetric_market(seed=3, n_areas=30, n_years=8)
        rng = np.random.default_rng(5)
        signal = flow([(y, a, float(rng.normal())) for a in areas for y in years[:-1]])
        universe = full_universe(areas, years[:-1])
        spec = StrategySpec(signal=signal, universe=universe, horizon=3)
        base = run_long_short(spec, index)

        shift = 0.04  # add a constant to every area's yearly return
        by_area = index.by_area()
        rows = []
        for a, series in by_area.items():
            lvl = 100.0
            for y in sorted(series):
                rows.append((y, a, lvl))
                if y + 1 in series:
                    lvl *= (series[y + 1] / series[y]) + shift
        shifted = run_long_short(StrategySpec(signal=signal, universe=universe, horizon=3), level(rows))
        for r1, r2 in zip(base.annual_returns, shifted.annual_returns):
            assert abs(r1 - r2) < 1e-12

    def test_monotone_signal_invariance(self):
        index, areas, years = symmetric_market(seed=4, n_areas=25, n_years=9)
        rng = np.random.default_rng(6)
        signal_rows = [(y, a, float(rng.normal())) for a in areas for y in years[:-1]]
        universe = full_universe(areas, years[:-1])
        base = run_long_short(
            StrategySpec(signal=flow(signal_rows), universe=universe, horizon=2), index
        )
        warped_rows = [(y, a, math.exp(3.0 * v) + 7.0) for (y, a, v) in signal_rows]
        warped = run_long_short(
            StrategySpec(signal=flow(warped_rows), universe=universe, horizon=2), index
        )
        assert warped.nav == base.nav  # bit-identical
        assert warped.cohorts == base.cohorts

    def test_nav_recomputable_from_returns(self):
        index, areas, years = symmetric_market(seed=7)
        rng = np.random.default_rng(7)
        signal = flow([(y, a, float(rng.normal())) for a in areas for y in years[:-1]])
        spec = StrategySpec(signal=signal, universe=full_universe(areas, years[:-1]), horizon=4)
        result = run_long_short(spec, index)
        nav = 1.0
        for i, r in enumerate(result.annual_returns):
            nav *= 1.0 + r
            assert abs(result.nav[i + 1] - nav) < 1e-12
        assert result.cagr == pytest.approx(result.nav[-1] ** (1 / len(result.annual_returns)) - 1, abs=1e-12)

    def test_missing_index_mid_hold_marks_then_drops(self):
        # area 1 index disappears in 2008 and 2009
        index = level(
            [(2006, "1", 100.0), (2007, "1", 110.0), (2010, "1", 150.0)]
            + [(y, "2", 100.0) for y in range(2006, 2011)]
            + [(y, "3", 100.0) for y in range(2006, 2011)]
            + [(y, "4", 100.0) for y in range(2006, 2011)]
        )
        signal = flow([(2006, "1", 2.0), (2006, "2", 1.0), (2006, "3", -1.0), (2006, "4", -2.0)])
        spec = StrategySpec(
            signal=signal,
            universe={2006: ("00001", "00002", "00003", "00004")},
            horizon=4,
            fraction=0.5,
        )
        result = run_long_short(spec, index)
        # 2007: long leg = mean(10%, 0%) = 5%; 2008: area 1 marked flat -> 0%;
        # 2009: area 1 dropped -> long = area 2 alone -> 0%
        assert result.annual_returns[0] == pytest.approx(0.05)
        assert result.annual_returns[1] == pytest.approx(0.0)
        assert result.annual_returns[2] == pytest.approx(0.0)
        assert any("marked at last value" in f for f in result.flags)
        assert any("dropped after repeated missing" in f for f in result.flags)


# ----------------------------------------------------------------------
# random_baseline
# ----------------------------------------------------------------------


class TestRandomBaseline:
    def test_fast_path_matches_general_engine(self):
        index, areas, years = symmetric_market(seed=9, n_areas=40, n_years=10)
        universe = full_universe(areas, years[:-1])
        spec = StrategySpec(
            signal=flow([(years[0], areas[0], 0.0)]), universe=universe, horizon=3, seed=123
        )
        view = _MarketView(index)
        runner = _FastBaselineRunner(spec, view)
        for i in range(5):
            fast = runner.run(np.random.default_rng(123 + i))
            noise = _noise_signal(np.random.default_rng(123 + i), universe)
            general = _run_with_view(
                StrategySpec(signal=noise, universe=universe, horizon=3, seed=123), view
            )
            assert fast.years == general.years
            assert fast.nav == general.nav

    def test_symmetric_market_median_near_one(self):
        index, areas, years = symmetric_market(seed=10, n_areas=50, n_years=12)
        universe = full_universe(areas, years[:-1])
        spec = StrategySpec(
            signal=flow([(years[0], areas[0], 0.0)]), universe=universe, horizon=2, seed=99
        )
        t0 = time.perf_counter()
        summary = random_baseline(spec, index, n_portfolios=1000)
        elapsed = time.perf_counter() - t0
        assert abs(summary.median_terminal_nav - 1.0) <= 0.02
        assert elapsed < 60

    def test_deterministic_summary(self):
        index, areas, years = symmetric_market(seed=11, n_areas=20, n_years=8)
        universe = full_universe(areas, years[:-1])
        spec = StrategySpec(
            signal=flow([(years[0], areas[0], 0.0)]), universe=universe, horizon=2, seed=5
        )
        a = random_baseline(spec, index, n_portfolios=50)
        b = random_baseline(spec, index, n_portfolios=50)
        assert a.nav_bands == b.nav_bands
        assert np.array_equal(a.cagrs, b.cagrs)

    def test_percentile_rank_bounds(self):
        index, areas, years = symmetric_market(seed=12, n_areas=20, n_years=8)
        universe = full_universe(areas, years[:-1])
        spec = StrategySpec(
            signal=flow([(years[0], areas[0], 0.0)]), universe=universe, horizon=1, seed=7
        )
        summary = random_baseline(spec, index, n_portfolios=100)
        assert 0.0 <= summary.percentile_rank(-10.0) <= 100.0
        assert summary.percentile_rank(10.0) == 100.0
        assert summary.percentile_rank(-10.0) == 0.0

    def test_requires_seed(self):
        index, areas, years = symmetric_market(seed=13, n_areas=10, n_years=6)
        spec = StrategySpec(
            signal=flow([(years[0], areas[0], 0.0)]),
            universe=full_universe(areas, years[:-1]),
            horizon=1,
        )
        with pytest.raises(ValueError, match="seed"):
            random_baseline(spec, index, n_portfolios=10)

    def test_half_split_symmetric_mean_return_near_zero(self):
        # long = short = half the universe on a symmetric market: expected
        # portfolio return is ~0 across noise portfolios
        index, areas, years = symmetric_market(seed=15, n_areas=30, n_years=10)
        universe = full_universe(areas, years[:-1])
        spec = StrategySpec(
            signal=flow([(years[0], areas[0], 0.0)]),
            universe=universe,
            horizon=1,
            fraction=0.5,
            seed=42,
        )
        summary = random_baseline(spec, index, n_portfolios=300)
        mean_annualized = np.mean(summary.cagrs)
        assert abs(mean_annualized) < 0.01


class TestPlantedSignal:
    def test_perfect_foresight_beats_baseline(self):
        from munifolio.panel import forward_return

        index, areas, years = symmetric_market(seed=14, n_areas=40, n_years=12)
        universe = full_universe(areas, years)
        for horizon in (1, 3):
            signal = forward_return(index, horizon)
            spec = StrategySpec(signal=signal, universe=universe, horizon=horizon, seed=2024)
            result = run_long_short(spec, index)
            baseline = random_baseline(spec, index, n_portfolios=200)
            assert result.cagr > baseline.cagr_percentile(95)
