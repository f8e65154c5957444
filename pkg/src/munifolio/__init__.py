"""Municipal real-estate research toolkit.

Builds quality-adjusted municipal house price indices from transaction
records, derives alternative-data factor panels, evaluates factor
predictiveness with linear models and decile long-short backtests against
random baselines, and trains a windowed spatio-temporal transformer to
forecast relative risk-adjusted returns.
"""

__version__ = "0.1.0"

from .panel import Panel, PanelObservation  # noqa: F401
