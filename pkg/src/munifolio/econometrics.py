"""PCA, OLS with inference, and the hedonic time-dummy index pipeline.

The index for one municipality comes from regressing ln(price per unit area)
on year indicators plus principal components of the expanded attributes; the
year coefficients, exponentiated and rebased to the second available year,
form a base-100 index.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

import numpy as np
from scipy import stats
from scipy.linalg import solve_triangular

from .ingest import TransactionRecord, expand_categoricals
from .panel import LEVEL, Panel


class RankDeficiencyError(ValueError):
    """Design matrix is rank deficient; names the offending columns."""

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__(f"rank-deficient design matrix; offending columns: {self.columns}")


class InsufficientDataError(ValueError):
    """Not enough observations to satisfy an estimator's preconditions."""


@dataclass(frozen=True)
class PcaModel:
    """Fitted principal-component reduction.

    ``components`` rows are orthonormal; ``explained_ratios`` cover all
    non-degenerate directions, of which the first ``k`` are retained.
    """

    mean: np.ndarray
    components: np.ndarray  # (k, n_features)
    explained_ratios: np.ndarray
    k: int

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) @ self.components.T

    @property
    def retained_variance(self) -> float:
        return float(np.sum(self.explained_ratios[: self.k]))


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit with classical inference."""

    column_names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    residual_sigma: float
    n_obs: int

    @property
    def dof(self) -> int:
        return self.n_obs - len(self.coefficients)

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.column_names.index(name)])


@dataclass(frozen=True)
class PriceIndex:
    """Base-100 price index series for one municipality.

    ``yoy`` holds the growth from the previous calendar year; None where the
    previous year is absent.
    """

    area_code: str
    base_year: int
    years: tuple[int, ...]
    values: tuple[float, ...]
    yoy: tuple[float | None, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.years) != len(self.values):
            raise ValueError("years and values length mismatch")
        if any(v <= 0 for v in self.values):
            raise ValueError("index values must be positive")
        if self.base_year not in self.years:
            raise ValueError("base year not in series")
        if self.values[self.years.index(self.base_year)] != 100.0:
            raise ValueError("base year index must be exactly 100")
        if not self.yoy:
            object.__setattr__(self, "yoy", compute_yoy(self.years, self.values))

    def to_panel_rows(self) -> list[tuple[int, str, float]]:
        return [(year, self.area_code, value) for year, value in zip(self.years, self.values)]


def compute_yoy(years: Sequence[int], values: Sequence[float]) -> tuple[float | None, ...]:
    lookup = dict(zip(years, values))
    out: list[float | None] = []
    for year, value in zip(years, values):
        prev = lookup.get(year - 1)
        out.append(None if prev is None else value / prev - 1.0)
    return tuple(out)


# ----------------------------------------------------------------------
# PCA
# ----------------------------------------------------------------------


def pca_reduce(x: np.ndarray, variance_target: float = 0.95) -> tuple[PcaModel, np.ndarray]:
    """Project ``x`` onto the fewest components explaining ``variance_target``.

    Expects standardized columns (constant columns removed upstream). The
    sign of each component is fixed so its largest-magnitude entry is
    positive, making runs reproducible.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("pca_reduce requires a matrix with at least 2 rows")
    if not (0.0 < variance_target <= 1.0):
        raise ValueError("variance_target must be in (0, 1]")
    mean = x.mean(axis=0)
    centered = x - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    total = float(np.sum(svals**2))
    if total <= 0.0:
        raise ValueError("rank-0 input: no variance to reduce")
    ratios = svals**2 / total
    cumulative = np.cumsum(ratios)
    k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    k = min(k, len(svals))

    components = vt.copy()
    for i in range(components.shape[0]):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]

    model = PcaModel(mean=mean, components=components[:k], explained_ratios=ratios, k=k)
    return model, model.transform(x)


# ----------------------------------------------------------------------
# OLS
# ----------------------------------------------------------------------


def ols_fit(x: np.ndarray, y: np.ndarray, column_names: Sequence[str] | None = None) -> OlsFit:
    """Least squares via QR with t-based inference.

    ``x`` must include the intercept column and have full column rank;
    deficiency raises :class:`RankDeficiencyError` naming the columns whose
    pivots collapse. Two-sided p-values use the t distribution with n - p
    degrees of freedom.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, p = x.shape
    if n <= p:
        raise InsufficientDataError(f"need more rows ({n}) than columns ({p})")
    if column_names is None:
        column_names = [f"x{j}" for j in range(p)]
    if len(column_names) != p:
        raise ValueError("column_names length mismatch")

    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    threshold = max(n, p) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    bad = [column_names[j] for j in range(p) if diag[j] <= threshold]
    if bad:
        raise RankDeficiencyError(bad)

    beta = solve_triangular(r, q.T @ y)
    residuals = y - x @ beta
    ssr = float(residuals @ residuals)
    dof = n - p
    sigma2 = ssr / dof
    r_inv = solve_triangular(r, np.eye(p))
    se = np.sqrt(np.maximum(sigma2 * np.sum(r_inv**2, axis=1), 0.0))

    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, beta / np.where(se > 0, se, 1.0), np.where(beta != 0, np.inf * np.sign(beta), 0.0))
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), dof)
    p_values = np.where(np.isnan(p_values), 1.0, p_values)

    sst = float(np.sum((y - y.mean()) ** 2))
    if sst > 0.0:
        r2 = 1.0 - ssr / sst
        adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / dof
    else:
        r2 = 0.0
        adj_r2 = 0.0
    if p > 1:
        if ssr > 0.0:
            f_stat = (r2 / (p - 1)) / ((1.0 - r2) / dof) if r2 < 1.0 else math.inf
        else:
            f_stat = math.inf if sst > 0 else 0.0
    else:
        f_stat = 0.0
    f_stat = max(float(f_stat), 0.0)

    return OlsFit(
        column_names=tuple(column_names),
        coefficients=beta,
        standard_errors=se,
        t_stats=t_stats,
        p_values=p_values,
        r_squared=r2,
        adj_r_squared=adj_r2,
        f_statistic=f_stat,
        residual_sigma=math.sqrt(sigma2),
        n_obs=n,
    )


# ----------------------------------------------------------------------
# Hedonic index pipeline
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class HedonicConfig:
    """Knobs for the per-municipality index build."""

    variance_target: float = 0.95
    min_transactions: int = 100
    min_per_year: int = 5
    max_columns: int = 75
    include_attributes: tuple[str, ...] | None = None
    exclude_attributes: tuple[str, ...] = ()


@dataclass
class HedonicDiagnostics:
    area_code: str
    n_transactions: int
    n_years: int
    k_components: int
    r_squared: float
    f_statistic: float
    dropped_years: list[int]
    dropped_columns: list[str]


def standardize_columns(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale to unit population variance per column."""
    mean = matrix.mean(axis=0)
    sd = matrix.std(axis=0)
    if np.any(sd <= 0):
        raise ValueError("constant column reached standardization")
    return (matrix - mean) / sd, mean, sd


def build_hedonic_index(
    records: Sequence[TransactionRecord],
    config: HedonicConfig | None = None,
    tally: Counter | None = None,
) -> tuple[PriceIndex, OlsFit, PcaModel, HedonicDiagnostics]:
    """Fit the hedonic time-dummy model for one municipality.

    Pipeline: expand categoricals -> standardize -> PCA at the variance
    target -> regress ln(price per unit area) on an intercept, year
    indicators (first year dropped as the zero reference), and the component
    scores -> rebase exp(gamma) to 100 at the second available year.

    Years with fewer than ``min_per_year`` transactions are excluded before
    fitting. Raises :class:`InsufficientDataError` when fewer than two years
    or ``min_transactions`` records remain.
    """
    if config is None:
        config = HedonicConfig()
    if not records:
        raise InsufficientDataError("no records")
    area = records[0].area_code

    if config.include_attributes is not None or config.exclude_attributes:
        records = [_filter_attributes(r, config) for r in records]

    year_counts = Counter(r.year for r in records)
    dropped_years = sorted(y for y, c in year_counts.items() if c < config.min_per_year)
    if dropped_years:
        records = [r for r in records if r.year not in dropped_years]
        if tally is not None:
            tally["hedonic.thin_year_dropped"] += len(dropped_years)
    years = sorted({r.year for r in records})
    if len(years) < 2:
        raise InsufficientDataError(f"{area}: need at least 2 indexed years, have {len(years)}")
    if len(records) < config.min_transactions:
        raise InsufficientDataError(
            f"{area}: {len(records)} transactions below minimum {config.min_transactions}"
        )

    frame = expand_categoricals(records, max_columns=config.max_columns, tally=tally)
    standardized, _, _ = standardize_columns(frame.matrix)
    pca_model, scores = pca_reduce(standardized, config.variance_target)

    n = len(records)
    dummy_years = years[1:]  # first year is the zero reference
    design = np.ones((n, 1 + len(dummy_years) + pca_model.k))
    names = ["const"]
    for j, year in enumerate(dummy_years):
        design[:, 1 + j] = frame.years == year
        names.append(f"year={year}")
    design[:, 1 + len(dummy_years) :] = scores
    names.extend(f"pc_{i + 1}" for i in range(pca_model.k))

    fit = ols_fit(design, frame.response, names)

    gamma = {years[0]: 0.0}
    for year in dummy_years:
        gamma[year] = fit.coefficient(f"year={year}")
    base_year = years[1]
    values = tuple(100.0 * math.exp(gamma[y] - gamma[base_year]) for y in years)
    index = PriceIndex(area_code=area, base_year=base_year, years=tuple(years), values=values)

    diagnostics = HedonicDiagnostics(
        area_code=area,
        n_transactions=n,
        n_years=len(years),
        k_components=pca_model.k,
        r_squared=fit.r_squared,
        f_statistic=fit.f_statistic,
        dropped_years=dropped_years,
        dropped_columns=frame.dropped_columns,
    )
    return index, fit, pca_model, diagnostics


def _filter_attributes(record: TransactionRecord, config: HedonicConfig) -> TransactionRecord:
    attrs = {
        k: v
        for k, v in record.attributes.items()
        if (config.include_attributes is None or k in config.include_attributes)
        and k not in config.exclude_attributes
    }
    return TransactionRecord(
        area_code=record.area_code,
        year=record.year,
        trade_price=record.trade_price,
        unit_area=record.unit_area,
        attributes=attrs,
    )


# ----------------------------------------------------------------------
# Index CSV (area_code, year, index, yoy)
# ----------------------------------------------------------------------

INDEX_CSV_HEADER = ["area_code", "year", "index", "yoy"]


def write_price_index_csv(indices: Sequence[PriceIndex], target: str | Path | IO[str]) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="\n") as handle:
            _write_index_csv(indices, handle)
    else:
        _write_index_csv(indices, target)


def _write_index_csv(indices: Sequence[PriceIndex], handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(INDEX_CSV_HEADER)
    for index in sorted(indices, key=lambda ix: ix.area_code):
        for year, value, yoy in zip(index.years, index.values, index.yoy):
            writer.writerow([index.area_code, year, repr(value), "" if yoy is None else repr(yoy)])


def read_price_index_csv(source: str | Path | IO[str]) -> Panel:
    """Read an index CSV back into a level Panel of index values."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as handle:
            return _read_index_csv(handle)
    return _read_index_csv(source)


def _read_index_csv(handle: IO[str]) -> Panel:
    reader = csv.reader(handle)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != INDEX_CSV_HEADER:
        raise ValueError(f"bad index CSV header: {header!r}")
    rows = [(int(r[1]), r[0], float(r[2])) for r in reader if r]
    return Panel.from_rows("price_index", rows, unit="index (base=100)", kind=LEVEL)
