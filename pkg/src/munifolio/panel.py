"""Cross-sectional time-series panels and the transforms shared by every stage.

A panel maps (area_code, year) keys to float values. Missing data is
represented by absence of the key, never by sentinel values; transforms that
drop observations report the drops through an optional ``tally`` Counter so
callers can surface diagnostics instead of silently losing rows.

All transforms are pure: they never mutate their inputs and produce identical
output for identical input.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

YEAR_MIN = 1985
YEAR_MAX = 2030

PANEL_CSV_HEADER = ["year", "area_code", "value"]

# Panel kinds: "level" for index-like series (prices, income, stock counts),
# "flow" for per-period ratios (migration ratio, growth rates).
LEVEL = "level"
FLOW = "flow"


def normalize_area_code(area_code: str | int) -> str:
    """Zero-pad municipality codes to the 5-character JIS convention."""
    code = str(area_code).strip()
    if not code:
        raise ValueError("empty area code")
    return code.zfill(5)


@dataclass(frozen=True)
class PanelObservation:
    """One (year, area_code, value) cell of a panel."""

    year: int
    area_code: str
    value: float

    def __post_init__(self) -> None:
        if not (YEAR_MIN <= self.year <= YEAR_MAX):
            raise ValueError(f"year {self.year} outside [{YEAR_MIN}, {YEAR_MAX}]")
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for ({self.area_code}, {self.year})")
        object.__setattr__(self, "area_code", normalize_area_code(self.area_code))


@dataclass(frozen=True)
class Panel:
    """Immutable cross-sectional time series keyed by (area_code, year).

    Parameters
    ----------
    name : str
        Label for the series (e.g. ``"price_index"``).
    data : mapping of (area_code, year) -> float
        Observations. Keys are normalized and validated on construction.
    unit : str
        Free-text unit tag.
    kind : str
        ``"level"`` or ``"flow"``; selects the cumulative-growth rule.
    """

    name: str
    data: Mapping[tuple[str, int], float] = field(default_factory=dict)
    unit: str = ""
    kind: str = LEVEL

    def __post_init__(self) -> None:
        if self.kind not in (LEVEL, FLOW):
            raise ValueError(f"unknown panel kind {self.kind!r}")
        clean: dict[tuple[str, int], float] = {}
        for (area, year), value in self.data.items():
            obs = PanelObservation(year=int(year), area_code=area, value=float(value))
            key = (obs.area_code, obs.year)
            if key in clean:
                raise ValueError(f"duplicate panel key {key} in {self.name!r}")
            clean[key] = obs.value
        object.__setattr__(self, "data", clean)

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def from_observations(
        cls,
        name: str,
        observations: Iterable[PanelObservation],
        unit: str = "",
        kind: str = LEVEL,
    ) -> "Panel":
        data: dict[tuple[str, int], float] = {}
        for obs in observations:
            key = (obs.area_code, obs.year)
            if key in data:
                raise ValueError(f"duplicate panel key {key} in {name!r}")
            data[key] = obs.value
        return cls(name=name, data=data, unit=unit, kind=kind)

    @classmethod
    def from_rows(
        cls,
        name: str,
        rows: Iterable[tuple[int, str | int, float]],
        unit: str = "",
        kind: str = LEVEL,
    ) -> "Panel":
        """Build from (year, area_code, value) triples."""
        return cls.from_observations(
            name,
            (PanelObservation(year=int(y), area_code=str(a), value=float(v)) for y, a, v in rows),
            unit=unit,
            kind=kind,
        )

    # ------------------------------------------------------------------
    # Access
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.data)

    def __contains__(self, key: tuple[str, int]) -> bool:
        return (normalize_area_code(key[0]), key[1]) in self.data

    def get(self, area_code: str, year: int, default: float | None = None) -> float | None:
        return self.data.get((normalize_area_code(area_code), year), default)

    def items(self) -> Iterator[tuple[tuple[str, int], float]]:
        """Observations sorted by (area_code, year)."""
        for key in sorted(self.data):
            yield key, self.data[key]

    def areas(self) -> list[str]:
        return sorted({area for area, _ in self.data})

    def years(self) -> list[int]:
        return sorted({year for _, year in self.data})

    def by_area(self) -> dict[str, dict[int, float]]:
        """Per-area year -> value maps (years in ascending order)."""
        out: dict[str, dict[int, float]] = {}
        for (area, year), value in sorted(self.data.items()):
            out.setdefault(area, {})[year] = value
        return out

    def with_kind(self, kind: str) -> "Panel":
        return Panel(name=self.name, data=dict(self.data), unit=self.unit, kind=kind)

    def rename(self, name: str) -> "Panel":
        return Panel(name=name, data=dict(self.data), unit=self.unit, kind=self.kind)

    # ------------------------------------------------------------------
    # Serialization: CSV with header year,area_code,value. Values are
    # written with repr() so the round trip is lossless for float64.
    # ------------------------------------------------------------------

    def to_csv(self, target: str | Path | IO[str]) -> None:
        if isinstance(target, (str, Path)):
            with open(target, "w", encoding="utf-8", newline="\n") as handle:
                self._write_csv(handle)
        else:
            self._write_csv(target)

    def _write_csv(self, handle: IO[str]) -> None:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PANEL_CSV_HEADER)
        for (area, year), value in self.items():
            writer.writerow([year, area, repr(value)])

    @classmethod
    def from_csv(
        cls,
        source: str | Path | IO[str],
        name: str = "",
        unit: str = "",
        kind: str = LEVEL,
    ) -> "Panel":
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8", newline="") as handle:
                return cls._read_csv(handle, name or Path(source).stem, unit, kind)
        return cls._read_csv(source, name, unit, kind)

    @classmethod
    def _read_csv(cls, handle: IO[str], name: str, unit: str, kind: str) -> "Panel":
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PANEL_CSV_HEADER:
            raise ValueError(f"bad panel CSV header: {header!r}")
        rows = [(int(r[0]), r[1], float(r[2])) for r in reader if r]
        return cls.from_rows(name, rows, unit=unit, kind=kind)

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self._write_csv(buf)
        return buf.getvalue()


# ----------------------------------------------------------------------
# Transforms
# ----------------------------------------------------------------------


def _tally(tally: Counter | None, reason: str, n: int = 1) -> None:
    if tally is not None and n:
        tally[reason] += n


def pct_change(p: Panel, periods: int, tally: Counter | None = None) -> Panel:
    """Percentage change over ``periods`` years: out(t) = p(t)/p(t-periods) - 1.

    Observations with a missing or non-positive denominator are dropped and
    counted under ``pct_change.bad_denominator`` in ``tally``.
    """
    if periods < 1:
        raise ValueError("periods must be a positive integer")
    data: dict[tuple[str, int], float] = {}
    for area, series in p.by_area().items():
        for year, value in series.items():
            base = series.get(year - periods)
            if base is None:
                continue
            if base <= 0:
                _tally(tally, "pct_change.bad_denominator")
                continue
            data[(area, year)] = value / base - 1.0
    return Panel(name=f"{p.name}_pct{periods}", data=data, unit="ratio", kind=FLOW)


def trailing_cum_growth(p: Panel, window: int = 3, tally: Counter | None = None) -> Panel:
    """Cumulative growth over the trailing ``window`` years.

    Level panels compound: out(t) = p(t)/p(t-window) - 1. Flow panels (already
    per-period ratios) sum the last ``window`` values. Observations lacking
    history are absent from the output.
    """
    if window < 1:
        raise ValueError("window must be a positive integer")
    data: dict[tuple[str, int], float] = {}
    for area, series in p.by_area().items():
        for year, value in series.items():
            if p.kind == LEVEL:
                base = series.get(year - window)
                if base is None:
                    continue
                if base <= 0:
                    _tally(tally, "trailing_cum_growth.bad_denominator")
                    continue
                data[(area, year)] = value / base - 1.0
            else:
                chunk = [series.get(year - i) for i in range(window)]
                if any(v is None for v in chunk):
                    continue
                data[(area, year)] = float(sum(chunk))  # type: ignore[arg-type]
    return Panel(name=f"{p.name}_cum{window}", data=data, unit="ratio", kind=FLOW)


def forward_return(index: Panel, horizon_k: int, tally: Counter | None = None) -> Panel:
    """k-year-ahead return stamped at the anchor year.

    out(t) = index(t+k)/index(t) - 1. Anchors whose future value is missing
    are absent from the output.
    """
    if not (1 <= horizon_k <= 4):
        raise ValueError("horizon_k must be in [1, 4]")
    data: dict[tuple[str, int], float] = {}
    for area, series in index.by_area().items():
        for year, value in series.items():
            future = series.get(year + horizon_k)
            if future is None:
                continue
            if value <= 0:
                _tally(tally, "forward_return.bad_denominator")
                continue
            data[(area, year)] = future / value - 1.0
    return Panel(name=f"{index.name}_fwd{horizon_k}", data=data, unit="ratio", kind=FLOW)


def normalize_per_year(p: Panel, tally: Counter | None = None) -> Panel:
    """Z-score values within each year (mean 0, population sd 1).

    Years with zero cross-sectional variance get all values set to 0 and are
    counted under ``normalize_per_year.zero_variance``.
    """
    by_year: dict[int, list[tuple[str, float]]] = {}
    for (area, year), value in p.data.items():
        by_year.setdefault(year, []).append((area, value))
    data: dict[tuple[str, int], float] = {}
    for year, cells in by_year.items():
        values = [v for _, v in cells]
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        if var <= 0.0:
            _tally(tally, "normalize_per_year.zero_variance")
            for area, _ in cells:
                data[(area, year)] = 0.0
            continue
        sd = math.sqrt(var)
        for area, value in cells:
            data[(area, year)] = (value - mean) / sd
    return Panel(name=f"{p.name}_znorm", data=data, unit="z-score", kind=p.kind)


def interpolate_gaps(p: Panel, max_gap: int, tally: Counter | None = None) -> Panel:
    """Linearly interpolate missing years between known observations per area.

    Only gaps of at most ``max_gap`` years between consecutive known years are
    filled; longer gaps are left missing (counted under
    ``interpolate_gaps.gap_too_long``). No extrapolation beyond endpoints.
    """
    if max_gap < 1:
        raise ValueError("max_gap must be a positive integer")
    data: dict[tuple[str, int], float] = {}
    for area, series in p.by_area().items():
        known = sorted(series.items())
        for year, value in known:
            data[(area, year)] = value
        for (y0, v0), (y1, v1) in zip(known, known[1:]):
            gap = y1 - y0
            if gap <= 1:
                continue
            if gap > max_gap:
                _tally(tally, "interpolate_gaps.gap_too_long")
                continue
            slope = (v1 - v0) / gap
            for year in range(y0 + 1, y1):
                data[(area, year)] = v0 + slope * (year - y0)
    return Panel(name=p.name, data=data, unit=p.unit, kind=p.kind)


def inner_join(panels: Iterable[Panel]) -> list[tuple[tuple[str, int], tuple[float, ...]]]:
    """Rows for keys present in every panel, sorted by (area_code, year)."""
    panel_list = list(panels)
    if not panel_list:
        return []
    keys = set(panel_list[0].data)
    for p in panel_list[1:]:
        keys &= set(p.data)
    return [(key, tuple(p.data[key] for p in panel_list)) for key in sorted(keys)]
