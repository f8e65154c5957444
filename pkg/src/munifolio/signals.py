"""Single-factor linear evaluation: trailing factor growth vs. forward returns.

One pooled OLS per (factor, horizon): x is the factor's cumulative growth
over the trailing three years, y the k-year-ahead index return, joined on
(year, area_code). The report carries the scatter rows so callers can write
them out for plotting.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .econometrics import InsufficientDataError, ols_fit
from .panel import Panel, forward_return, trailing_cum_growth


@dataclass(frozen=True)
class LinearEvalReport:
    """Pooled regression summary for one factor at one horizon."""

    factor_name: str
    horizon: int
    n_obs: int
    slope: float
    intercept: float
    slope_p_value: float
    r_squared: float
    f_statistic: float
    scatter: tuple[tuple[str, int, float, float], ...]  # (area, year, x, y)

    def to_dict(self) -> dict:
        return {
            "factor": self.factor_name,
            "horizon": self.horizon,
            "n_obs": self.n_obs,
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_p_value": self.slope_p_value,
            "r_squared": self.r_squared,
            "f_statistic": self.f_statistic,
        }


def evaluate_factor_linear(
    factor: Panel,
    index: Panel,
    horizon_k: int,
    factor_name: str | None = None,
    trailing_window: int = 3,
    tally: Counter | None = None,
) -> LinearEvalReport:
    """Regress k-year forward returns on trailing cumulative factor growth.

    The factor's kind tag selects the cumulation rule (levels compound,
    flows sum). Observations missing either side of the join are discarded;
    fewer than three joined rows raise :class:`InsufficientDataError`.
    """
    if horizon_k not in (1, 2, 3, 4):
        raise ValueError("horizon_k must be one of 1..4")
    x_panel = trailing_cum_growth(factor, trailing_window, tally=tally)
    y_panel = forward_return(index, horizon_k, tally=tally)

    keys = sorted(set(x_panel.data) & set(y_panel.data))
    if tally is not None:
        tally["evaluate_factor_linear.join_discarded"] += (
            len(set(x_panel.data) | set(y_panel.data)) - len(keys)
        )
    if len(keys) <= 2:
        raise InsufficientDataError(f"joined sample has {len(keys)} rows; need > 2")

    x = np.array([x_panel.data[k] for k in keys])
    y = np.array([y_panel.data[k] for k in keys])
    design = np.column_stack([np.ones(len(x)), x])
    fit = ols_fit(design, y, ["const", "slope"])

    return LinearEvalReport(
        factor_name=factor_name or factor.name,
        horizon=horizon_k,
        n_obs=len(keys),
        slope=float(fit.coefficients[1]),
        intercept=float(fit.coefficients[0]),
        slope_p_value=float(fit.p_values[1]),
        r_squared=fit.r_squared,
        f_statistic=fit.f_statistic,
        scatter=tuple((area, year, float(xv), float(yv)) for (area, year), xv, yv in zip(keys, x, y)),
    )
