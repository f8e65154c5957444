"""Pipeline orchestrator: one executable, one subcommand per stage.

Every run writes its artifacts under ``--out`` plus a ``manifest.json``
recording the subcommand, the resolved configuration, SHA-256 digests of
every input file consumed, the seed, the tool version, and the wall-clock
runtime. All randomness flows from the explicit ``--seed`` flag. Report
paths write a PNG figure next to each delimited output.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import click

from . import __version__
from .backtest import BacktestResult, BaselineSummary, StrategySpec, build_universe, random_baseline, run_long_short
from .econometrics import (
    HedonicConfig,
    InsufficientDataError,
    PriceIndex,
    build_hedonic_index,
    read_price_index_csv,
    write_price_index_csv,
)
from .factors import FACTOR_NAMES, build_signal, linear_model_input, net_migration_ratio, new_dwellings_ratio
from .forecaster import (
    ModelConfig,
    SplitSpec,
    TrainedModel,
    WindowConfig,
    decile_report,
    evaluate_r2,
    prepare_dataset,
    train,
)
from .ingest import (
    SchemaError,
    SynthSpec,
    load_centroids,
    load_column_schema,
    load_factor_csv,
    parse_transactions,
    synth_generate,
    synth_schema,
    write_centroids,
    write_factor_csv,
    write_transactions_csv,
)
from .panel import PANEL_CSV_HEADER, Panel, pct_change
from .signals import evaluate_factor_linear

DEFAULT_FEATURES = (
    "yearly_return",
    "net_migration_ratio",
    "taxable_income_growth",
    "new_dwellings_ratio",
    "taxpayers_growth",
)

_DATA_ERRORS = (SchemaError, InsufficientDataError, ValueError, KeyError, FileNotFoundError, AssertionError)


# ----------------------------------------------------------------------
# Configuration file (INI-style key = value sections)
# ----------------------------------------------------------------------


@dataclass
class PipelineConfig:
    hedonic: HedonicConfig = field(default_factory=HedonicConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    features: tuple[str, ...] = DEFAULT_FEATURES
    sigma_floor: float = 0.01
    raw_text: str = ""

    def snapshot(self) -> dict:
        return {
            "hedonic": asdict(self.hedonic),
            "window": asdict(self.window),
            "model": self.model.to_dict(),
            "split": asdict(self.split),
            "features": list(self.features),
            "sigma_floor": self.sigma_floor,
            "config_file_text": self.raw_text,
        }


def _coerce(kind, text: str):
    text = text.strip()
    if kind is bool or kind == "bool":
        return text.lower() in ("1", "true", "yes", "on")
    if kind is int or kind == "int":
        return int(text)
    if kind is float or kind == "float":
        return float(text)
    return text


def _apply_section(instance, section: configparser.SectionProxy):
    kwargs = {}
    for f in fields(instance):
        if f.name not in section:
            continue
        raw = section[f.name]
        if f.type in ("int", int):
            kwargs[f.name] = int(raw)
        elif f.type in ("float", float):
            kwargs[f.name] = float(raw)
        elif f.type in ("bool", bool):
            kwargs[f.name] = _coerce(bool, raw)
        elif "tuple" in str(f.type):
            kwargs[f.name] = tuple(item.strip() for item in raw.split(",") if item.strip())
        else:
            kwargs[f.name] = raw.strip()
    return replace(instance, **kwargs) if kwargs else instance


def load_config(path: str | Path | None) -> PipelineConfig:
    config = PipelineConfig()
    if path is None:
        return config
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser()
    parser.read_string(text)
    if parser.has_section("hedonic"):
        config.hedonic = _apply_section(config.hedonic, parser["hedonic"])
    if parser.has_section("windows"):
        config.window = _apply_section(config.window, parser["windows"])
        if "features" in parser["windows"]:
            config.features = tuple(
                item.strip() for item in parser["windows"]["features"].split(",") if item.strip()
            )
    if parser.has_section("model"):
        config.model = _apply_section(config.model, parser["model"])
    if parser.has_section("split"):
        config.split = _apply_section(config.split, parser["split"])
    if parser.has_section("target") and "sigma_floor" in parser["target"]:
        config.sigma_floor = float(parser["target"]["sigma_floor"])
    config.raw_text = text
    return config


# ----------------------------------------------------------------------
# Manifest
# ----------------------------------------------------------------------


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    inputs: dict[str, str]
    seed: int | None
    version: str
    runtime_seconds: float

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(asdict(self), handle, indent=2, sort_keys=True)
            handle.write("\n")


class Stage:
    """Collects input digests and timing for one subcommand run."""

    def __init__(self, subcommand: str, out_dir: str | Path, seed: int | None, config: dict):
        self.subcommand = subcommand
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.config = config
        self.inputs: dict[str, str] = {}
        self.started = time.perf_counter()

    def add_input(self, path: str | Path) -> Path:
        path = Path(path)
        self.inputs[str(path)] = sha256_file(path)
        return path

    def finish(self) -> None:
        manifest = RunManifest(
            subcommand=self.subcommand,
            config=self.config,
            inputs=self.inputs,
            seed=self.seed,
            version=__version__,
            runtime_seconds=time.perf_counter() - self.started,
        )
        manifest.write(self.out / "manifest.json")


def _fail(exc: BaseException) -> None:
    click.echo(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), err=True)
    sys.exit(1)


# ----------------------------------------------------------------------
# Shared loaders
# ----------------------------------------------------------------------


def load_index_any(path: str | Path) -> Panel:
    """Accept either the 3-column panel CSV or the 4-column index CSV."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        header = next(csv.reader(handle), None)
    if header is not None and [h.strip() for h in header] == PANEL_CSV_HEADER:
        return Panel.from_csv(path, name="price_index", unit="index (base=100)")
    return read_price_index_csv(path)


def _load_data_dir(stage: Stage, data_dir: Path, schema_ids: list[str]) -> dict[str, Panel]:
    panels = {}
    for schema_id in schema_ids:
        path = data_dir / f"{schema_id}.csv"
        stage.add_input(path)
        panels[schema_id] = load_factor_csv(path, schema_id)
    return panels


def _build_feature_panels(
    names: tuple[str, ...],
    index: Panel,
    panels: dict[str, Panel],
    tally: Counter,
) -> dict[str, Panel]:
    out: dict[str, Panel] = {}
    for name in names:
        if name == "yearly_return":
            out[name] = pct_change(index, 1, tally=tally).rename(name)
        elif name == "net_migration_ratio":
            out[name] = net_migration_ratio(
                panels["in_migration"], panels["out_migration"], panels["population"], tally
            )
        elif name == "taxable_income_growth":
            out[name] = pct_change(panels["taxable_income"], 1, tally=tally).rename(name)
        elif name == "new_dwellings_ratio":
            out[name] = new_dwellings_ratio(panels["new_starts"], panels["dwelling_stock"], tally=tally)
        elif name == "taxpayers_growth":
            out[name] = pct_change(panels["taxpayers"], 1, tally=tally).rename(name)
        else:
            raise ValueError(f"unknown feature {name!r}")
    return out


_FEATURE_SCHEMAS = {
    "yearly_return": [],
    "net_migration_ratio": ["in_migration", "out_migration", "population"],
    "taxable_income_growth": ["taxable_income"],
    "new_dwellings_ratio": ["new_starts", "dwelling_stock"],
    "taxpayers_growth": ["taxpayers"],
}

_FACTOR_INPUTS = {
    "migration": ["in_migration", "out_migration", "population"],
    "income": ["taxable_income"],
    "dwellings": ["new_starts", "dwelling_stock"],
    "mean_reversion": [],
    "neighbors": [],
}


# ----------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Municipal price indices, factor backtests, and return forecasting."""


out_option = click.option(
    "--out",
    required=True,
    envvar="MUNIFOLIO_OUT",
    type=click.Path(file_okay=False),
    help="Output directory (or set MUNIFOLIO_OUT).",
)


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--areas", type=int, default=20, show_default=True)
@click.option("--year-start", type=int, default=2006, show_default=True)
@click.option("--year-end", type=int, default=2020, show_default=True)
@click.option("--tx", type=int, default=100, show_default=True, help="Transactions per area-year.")
@click.option("--sigma", type=float, default=0.1, show_default=True)
@out_option
def synth(seed: int, areas: int, year_start: int, year_end: int, tx: int, sigma: float, out: str) -> None:
    """Generate a synthetic dataset with known ground truth."""
    try:
        spec = SynthSpec(
            n_areas=areas,
            year_start=year_start,
            year_end=year_end,
            tx_per_area_year=tx,
            sigma=sigma,
            seed=seed,
        )
        stage = Stage("synth", out, seed, {"synth": asdict(spec)})
        data = synth_generate(spec)
        write_transactions_csv(data.transactions, stage.out / "transactions.csv")
        for schema_id, panel in data.factor_panels.items():
            write_factor_csv(panel, schema_id, stage.out / f"{schema_id}.csv")
        write_centroids(data.centroids, stage.out / "centroids.csv")
        data.true_index.to_csv(stage.out / "true_index.csv")
        stage.finish()
        click.echo(f"synth: {len(data.transactions)} transactions, {areas} areas -> {stage.out}")
    except _DATA_ERRORS as exc:
        _fail(exc)


@main.command()
@click.option("--transactions", "transactions_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", "schema_path", type=click.Path(exists=True, dir_okay=False), help="JSON column map; defaults to the synthetic layout.")
@out_option
def ingest(transactions_path: str, schema_path: str | None, out: str) -> None:
    """Validate a transaction file; write the clean rows and reject tallies."""
    try:
        stage = Stage("ingest", out, None, {"schema": schema_path or "builtin"})
        stage.add_input(transactions_path)
        schema = synth_schema()
        if schema_path:
            stage.add_input(schema_path)
            schema = load_column_schema(schema_path)
        tally: Counter = Counter()
        records = parse_transactions(transactions_path, schema, tally=tally)
        write_transactions_csv(records, stage.out / "transactions_clean.csv", schema)
        report = {
            "accepted": len(records),
            "rejected": sum(tally.values()),
            "reject_reasons": dict(sorted(tally.items())),
        }
        with open(stage.out / "ingest.json", "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2, sort_keys=True)
            handle.write("\n")
        stage.finish()
        click.echo(f"ingest: accepted {report['accepted']}, rejected {report['rejected']}")
    except _DATA_ERRORS as exc:
        _fail(exc)


def _index_worker(payload):
    records, config = payload
    area = records[0].area_code
    try:
        index, fit, pca, diag = build_hedonic_index(records, config)
        return ("ok", area, index, diag)
    except InsufficientDataError as exc:
        return ("skip", area, str(exc), None)


@main.command("index")
@click.option("--transactions", "transactions_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", "schema_path", type=click.Path(exists=True, dir_okay=False), help="JSON column map; defaults to the synthetic layout.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--min-transactions", type=int, default=None, help="Override the indexability threshold.")
@click.option("--min-per-year", type=int, default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@out_option
def index_cmd(
    transactions_path: str,
    schema_path: str | None,
    config_path: str | None,
    min_transactions: int | None,
    min_per_year: int | None,
    jobs: int,
    out: str,
) -> None:
    """Build the hedonic price index for every indexable municipality."""
    try:
        pipeline = load_config(config_path)
        hedonic = pipeline.hedonic
        if min_transactions is not None:
            hedonic = replace(hedonic, min_transactions=min_transactions)
        if min_per_year is not None:
            hedonic = replace(hedonic, min_per_year=min_per_year)
        stage = Stage("index", out, None, {"hedonic": asdict(hedonic), "config_file_text": pipeline.raw_text})
        stage.add_input(transactions_path)
        if config_path:
            stage.add_input(config_path)
        schema = synth_schema()
        if schema_path:
            stage.add_input(schema_path)
            schema = load_column_schema(schema_path)

        tally: Counter = Counter()
        records = parse_transactions(transactions_path, schema, tally=tally)
        by_area: dict[str, list] = {}
        for record in records:
            by_area.setdefault(record.area_code, []).append(record)

        payloads = [(by_area[a], hedonic) for a in sorted(by_area)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_index_worker, payloads))
        else:
            results = [_index_worker(p) for p in payloads]

        indices: list[PriceIndex] = []
        diagnostics_dir = stage.out / "diagnostics"
        diagnostics_dir.mkdir(exist_ok=True)
        skipped = {}
        for result in results:
            if result[0] == "ok":
                _, area, price_index, diag = result
                indices.append(price_index)
                with open(diagnostics_dir / f"{area}.json", "w", encoding="utf-8") as handle:
                    json.dump(
                        {
                            "area_code": diag.area_code,
                            "n_transactions": diag.n_transactions,
                            "n_years": diag.n_years,
                            "k_components": diag.k_components,
                            "r_squared": diag.r_squared,
                            "f_statistic": diag.f_statistic,
                            "dropped_years": diag.dropped_years,
                            "dropped_columns": diag.dropped_columns,
                        },
                        handle,
                        indent=2,
                        sort_keys=True,
                    )
                    handle.write("\n")
            else:
                skipped[result[1]] = result[2]
        if not indices:
            raise InsufficientDataError("no municipality passed the indexability thresholds")
        write_price_index_csv(indices, stage.out / "index.csv")
        with open(stage.out / "skipped.json", "w", encoding="utf-8") as handle:
            json.dump({"skipped": skipped, "parse_rejects": dict(sorted(tally.items()))}, handle, indent=2, sort_keys=True)
            handle.write("\n")

        from .plotting import plot_index_series

        plot_index_series(read_price_index_csv(stage.out / "index.csv"), stage.out / "index.png")
        stage.finish()
        click.echo(f"index: {len(indices)} municipalities indexed, {len(skipped)} skipped")
    except _DATA_ERRORS as exc:
        _fail(exc)


@main.command()
@click.option("--factor", "factor_name", required=True, type=click.Choice(FACTOR_NAMES))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False), help="Required for mean_reversion and neighbors.")
@out_option
def factor(factor_name: str, data_dir: str, index_path: str | None, out: str) -> None:
    """Build one factor panel and its trailing-growth ranking signal."""
    try:
        stage = Stage("factor", out, None, {"factor": factor_name})
        data_path = Path(data_dir)
        tally: Counter = Counter()
        panels = _load_data_dir(stage, data_path, _FACTOR_INPUTS[factor_name])

        needs_index = factor_name in ("mean_reversion", "neighbors")
        index_panel = Panel(name="price_index", data={})
        if needs_index:
            if index_path is None:
                raise ValueError(f"--index is required for factor {factor_name!r}")
            stage.add_input(index_path)
            index_panel = load_index_any(index_path)
        centroids = None
        if factor_name == "neighbors":
            centroid_path = stage.add_input(data_path / "centroids.csv")
            centroids = load_centroids(centroid_path)
        if factor_name == "income":
            # signal needs the level; the per-year factor is its growth
            factor_panel = pct_change(panels["taxable_income"], 1, tally=tally).rename("taxable_income_growth")
        elif factor_name == "mean_reversion":
            from .factors import historical_return_signal

            factor_panel = historical_return_signal(index_panel, tally=tally)
        else:
            factor_panel = linear_model_input(factor_name, index_panel, panels, centroids, tally)
        signal = build_signal(factor_name, index_panel, panels, centroids, tally=tally)

        factor_panel.to_csv(stage.out / f"factor_{factor_name}.csv")
        signal.to_csv(stage.out / f"signal_{factor_name}.csv")
        with open(stage.out / "factor_diagnostics.json", "w", encoding="utf-8") as handle:
            json.dump({"tally": dict(sorted(tally.items())), "n_factor": len(factor_panel), "n_signal": len(signal)}, handle, indent=2, sort_keys=True)
            handle.write("\n")
        stage.finish()
        click.echo(f"factor {factor_name}: {len(factor_panel)} factor rows, {len(signal)} signal rows")
    except _DATA_ERRORS as exc:
        _fail(exc)


@main.command("eval-linear")
@click.option("--factor", "factor_name", required=True, type=click.Choice(FACTOR_NAMES))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", type=click.IntRange(1, 4), required=True)
@out_option
def eval_linear(factor_name: str, data_dir: str, index_path: str, horizon: int, out: str) -> None:
    """Pooled linear model: trailing factor growth vs. forward returns."""
    try:
        stage = Stage("eval-linear", out, None, {"factor": factor_name, "horizon": horizon})
        data_path = Path(data_dir)
        tally: Counter = Counter()
        panels = _load_data_dir(stage, data_path, _FACTOR_INPUTS[factor_name])
        stage.add_input(index_path)
        index_panel = load_index_any(index_path)
        centroids = None
        if factor_name == "neighbors":
            centroids = load_centroids(stage.add_input(data_path / "centroids.csv"))

        factor_input = linear_model_input(factor_name, index_panel, panels, centroids, tally)
        report = evaluate_factor_linear(factor_input, index_panel, horizon, factor_name=factor_name, tally=tally)

        with open(stage.out / "eval_linear.json", "w", encoding="utf-8") as handle:
            json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        with open(stage.out / "scatter.csv", "w", encoding="utf-8", newline="\n") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["x", "y", "area_code", "year"])
            for area, year, x, y in report.scatter:
                writer.writerow([repr(x), repr(y), area, year])

        from .plotting import plot_linear_eval

        plot_linear_eval(report, stage.out / "scatter.png")
        stage.finish()
        click.echo(
            f"eval-linear {factor_name} {horizon}y: slope={report.slope:.4f} "
            f"R2={report.r_squared:.4f} n={report.n_obs}"
        )
    except _DATA_ERRORS as exc:
        _fail(exc)


@main.command()
@click.option("--signal", "signal_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--population", "population_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", type=click.IntRange(1, 4), required=True)
@click.option("--universe-size", type=int, default=500, show_default=True)
@click.option("--fraction", type=float, default=0.1, show_default=True)
@click.option("--baseline-n", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@out_option
def backtest(
    signal_path: str,
    index_path: str,
    population_path: str,
    horizon: int,
    universe_size: int,
    fraction: float,
    baseline_n: int,
    seed: int,
    out: str,
) -> None:
    """Run the long-short strategy and its random-noise baseline."""
    try:
        stage = Stage(
            "backtest",
            out,
            seed,
            {
                "horizon": horizon,
                "universe_size": universe_size,
                "fraction": fraction,
                "baseline_n": baseline_n,
            },
        )
        stage.add_input(signal_path)
        stage.add_input(index_path)
        stage.add_input(population_path)
        signal = Panel.from_csv(signal_path, name="signal", kind="flow")
        index_panel = load_index_any(index_path)
        population = load_factor_csv(population_path, "population")

        tally: Counter = Counter()
        entry_years = sorted(set(signal.years()) & set(y for y in index_panel.years() if y < max(index_panel.years())))
        universe = build_universe(population, universe_size, entry_years, tally)
        spec = StrategySpec(signal=signal, universe=universe, horizon=horizon, fraction=fraction, seed=seed)
        result = run_long_short(spec, index_panel, tally)
        baseline = random_baseline(spec, index_panel, n_portfolios=baseline_n, tally=tally)

        _write_backtest_outputs(stage, result, baseline)
        stage.finish()
        cagr = "n/a" if result.cagr is None else f"{100 * result.cagr:.2f}%"
        sharpe = "n/a" if result.sharpe is None else f"{result.sharpe:.2f}"
        click.echo(
            f"backtest: CAGR {cagr}, Sharpe {sharpe}, "
            f"baseline CAGR percentile {baseline.percentile_rank(result.cagr or 0.0):.1f}"
        )
    except _DATA_ERRORS as exc:
        _fail(exc)


def _write_backtest_outputs(stage: Stage, result: BacktestResult, baseline: BaselineSummary) -> None:
    payload = result.to_dict()
    payload["baseline"] = {
        "median_terminal_nav": baseline.median_terminal_nav,
        "cagr_percentiles": {str(q): baseline.cagr_percentile(q) for q in (5, 25, 50, 75, 95)},
        "strategy_cagr_percentile_rank": baseline.percentile_rank(result.cagr or 0.0),
        "flags": list(baseline.flags),
    }
    with open(stage.out / "backtest.json", "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    with open(stage.out / "nav.csv", "w", encoding="utf-8", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["year", "nav"])
        for year, nav in zip(result.years, result.nav):
            writer.writerow([year, repr(nav)])
    with open(stage.out / "baseline_bands.csv", "w", encoding="utf-8", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["year", "p5", "p25", "p50", "p75", "p95"])
        for i, year in enumerate(baseline.years):
            writer.writerow([year] + [repr(baseline.nav_bands[q][i]) for q in (5, 25, 50, 75, 95)])

    from .plotting import plot_backtest

    plot_backtest(result, baseline, stage.out / "backtest.png")


def _dataset_from_data_dir(stage: Stage, data_dir: Path, index_path: str, pipeline: PipelineConfig):
    schema_ids = sorted({s for name in pipeline.features for s in _FEATURE_SCHEMAS[name]} | {"population"})
    panels = _load_data_dir(stage, data_dir, schema_ids)
    stage.add_input(index_path)
    index_panel = load_index_any(index_path)
    centroids = load_centroids(stage.add_input(data_dir / "centroids.csv"))
    tally: Counter = Counter()
    features = _build_feature_panels(pipeline.features, index_panel, panels, tally)
    dataset = prepare_dataset(
        features,
        index_panel,
        panels["population"],
        centroids,
        window_config=pipeline.window,
        split=pipeline.split,
        horizon=pipeline.model.target_horizon,
        sigma_floor=pipeline.sigma_floor,
        tally=tally,
    )
    return dataset, tally


@main.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, required=True)
@out_option
def train_cmd(data_dir: str, index_path: str, config_path: str | None, seed: int, out: str) -> None:
    """Train the windowed transformer on the factor dataset."""
    try:
        pipeline = load_config(config_path)
        stage = Stage("train", out, seed, pipeline.snapshot())
        if config_path:
            stage.add_input(config_path)
        dataset, tally = _dataset_from_data_dir(stage, Path(data_dir), index_path, pipeline)
        trained = train(dataset, pipeline.model, seed)
        trained.save(stage.out / "model.bin")

        with open(stage.out / "training_history.csv", "w", encoding="utf-8", newline="\n") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            columns = ["epoch", "train_loss"] + (["test_loss"] if dataset.test_samples() else [])
            writer.writerow(columns)
            for row in trained.history:
                writer.writerow([row[c] if c == "epoch" else repr(row[c]) for c in columns])
        with open(stage.out / "train_diagnostics.json", "w", encoding="utf-8") as handle:
            json.dump(
                {
                    "n_samples": len(dataset.samples),
                    "n_train": len(dataset.train_samples()),
                    "n_test": len(dataset.test_samples()),
                    "n_features": len(dataset.feature_names),
                    "tally": dict(sorted(tally.items())),
                },
                handle,
                indent=2,
                sort_keys=True,
            )
            handle.write("\n")

        from .plotting import plot_training_history

        plot_training_history(trained.history, stage.out / "loss.png")
        stage.finish()
        final = trained.history[-1]["train_loss"] if trained.history else float("nan")
        click.echo(
            f"train: {len(dataset.train_samples())} train / {len(dataset.test_samples())} test samples, "
            f"final weighted MSE {final:.6f}"
        )
    except _DATA_ERRORS as exc:
        _fail(exc)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@out_option
def evaluate(model_path: str, data_dir: str, index_path: str, out: str) -> None:
    """Out-of-sample R-squared of a trained model on the test anchors."""
    try:
        stage = Stage("evaluate", out, None, {})
        stage.add_input(model_path)
        trained = TrainedModel.load(model_path)
        pipeline = PipelineConfig(
            window=trained.window,
            model=trained.config,
            split=trained.split,
            features=tuple(trained.feature_names[: trained.n_own_features]),
            sigma_floor=trained.sigma_floor,
        )
        dataset, _ = _dataset_from_data_dir(stage, Path(data_dir), index_path, pipeline)
        test = dataset.test_samples()
        r2 = evaluate_r2(trained, test)
        with open(stage.out / "evaluation.json", "w", encoding="utf-8") as handle:
            json.dump({"r_squared": r2, "n_test": len(test)}, handle, indent=2, sort_keys=True)
            handle.write("\n")
        stage.finish()
        click.echo(f"evaluate: R2 {r2:.4f} on {len(test)} test samples")
    except _DATA_ERRORS as exc:
        _fail(exc)


@main.command("report-deciles")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n-samples", type=int, default=10, show_default=True)
@click.option("--seed", type=int, required=True)
@out_option
def report_deciles(model_path: str, data_dir: str, index_path: str, n_samples: int, seed: int, out: str) -> None:
    """Input trajectories for top- vs bottom-decile model outputs."""
    try:
        stage = Stage("report-deciles", out, seed, {"n_samples": n_samples})
        stage.add_input(model_path)
        trained = TrainedModel.load(model_path)
        pipeline = PipelineConfig(
            window=trained.window,
            model=trained.config,
            split=trained.split,
            features=tuple(trained.feature_names[: trained.n_own_features]),
            sigma_floor=trained.sigma_floor,
        )
        dataset, _ = _dataset_from_data_dir(stage, Path(data_dir), index_path, pipeline)
        report = decile_report(trained, dataset.samples, n_samples=n_samples, seed=seed)

        from .plotting import plot_decile_trajectories

        for variable in report.variables():
            with open(stage.out / f"decile_{variable}.csv", "w", encoding="utf-8", newline="\n") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(["group", "area_code", "anchor_year", "year", "value"])
                for traj in report.for_variable(variable):
                    for year, value in zip(traj.years, traj.values):
                        writer.writerow([traj.group, traj.area_code, traj.anchor_year, year, repr(value)])
            plot_decile_trajectories(report, variable, stage.out / f"decile_{variable}.png")
        stage.finish()
        click.echo(f"report-deciles: {len(report.variables())} variables, {n_samples} samples per decile")
    except _DATA_ERRORS as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
