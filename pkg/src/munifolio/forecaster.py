"""Windowed spatio-temporal dataset and a compact causal transformer.

The model consumes a five-year window of per-municipality features (own
factors plus distance-tagged neighbour features), embeds each year, adds
sinusoidal positions, runs a stack of causally-masked self-attention blocks,
and reads the final time step through a linear head to predict the
normalized risk-adjusted return four years out. Training minimizes a
population-weighted squared error.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn

from .factors import knn_neighbors
from .panel import Panel


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and optimization hyperparameters."""

    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 4
    d_hidden: int = 128
    dropout: float = 0.1
    learning_rate: float = 3e-4
    weight_decay: float = 1.0
    lookback: int = 5
    target_horizon: int = 4
    batch_size: int = 64
    epochs: int = 200

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even for sinusoidal encoding")
        for name in ("d_model", "n_heads", "n_layers", "d_hidden", "lookback", "target_horizon", "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelConfig":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


@dataclass(frozen=True)
class SplitSpec:
    """Anchor-year split. Training anchors must keep their whole target
    window strictly before the first test anchor."""

    test_start: int = 2021
    test_end: int = 2022

    def train_max_anchor(self, horizon: int) -> int:
        return self.test_start - horizon - 1


@dataclass(frozen=True)
class WindowConfig:
    """Window assembly knobs."""

    lookback: int = 5
    n_neighbours: int = 5
    neighbour_features: tuple[str, ...] = ("yearly_return",)
    allow_short_windows: bool = False
    min_window_rows: int = 2

    def n_columns(self, n_own: int) -> int:
        return n_own + self.n_neighbours * (len(self.neighbour_features) + 1)


@dataclass
class WindowSample:
    """One (area, anchor year) training sample.

    ``features`` rows run oldest to newest over the lookback window; masked
    cells (False in ``mask``) hold zero and mark data that was missing rather
    than genuinely zero.
    """

    area_code: str
    anchor_year: int
    features: np.ndarray
    mask: np.ndarray
    target: float
    weight: float


@dataclass
class WindowDataset:
    samples: list[WindowSample]
    feature_names: list[str]
    n_own_features: int
    norm_stats: dict[int, tuple[float, float]]
    horizon: int
    split: SplitSpec
    window: WindowConfig | None = None
    sigma_floor: float = 0.01

    def train_samples(self) -> list[WindowSample]:
        cutoff = self.split.train_max_anchor(self.horizon)
        return [s for s in self.samples if s.anchor_year <= cutoff]

    def test_samples(self) -> list[WindowSample]:
        return [s for s in self.samples if self.split.test_start <= s.anchor_year <= self.split.test_end]

    def assert_split_hygiene(self) -> None:
        """No training target window may reach any test anchor year."""
        for s in self.train_samples():
            if s.anchor_year + self.horizon >= self.split.test_start:
                raise AssertionError(
                    f"training sample ({s.area_code}, {s.anchor_year}) target window "
                    f"reaches test period starting {self.split.test_start}"
                )


def population_weight(population: float) -> float:
    """Sample weight 1 + log10(population), floored at 1."""
    if population < 1.0:
        return 1.0
    return 1.0 + math.log10(population)


# ----------------------------------------------------------------------
# Target construction
# ----------------------------------------------------------------------


def risk_adjusted_target(
    index: Panel,
    horizon: int = 4,
    sigma_floor: float = 0.01,
    train_years: set[int] | None = None,
    tally: Counter | None = None,
) -> tuple[Panel, dict[int, tuple[float, float]]]:
    """Normalized risk-adjusted forward returns.

    The raw value at anchor t is the cumulative return over (t, t+horizon]
    divided by the sample standard deviation of its constituent annual
    returns (floored at ``sigma_floor``, flagged when the floor binds). Raw
    values are then z-scored within each anchor year; when ``train_years`` is
    given, statistics come from training anchors only and later years reuse
    the latest training year's statistics (no test-year leakage).

    Returns the normalized panel and the per-year (mean, sd) statistics.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    raw: dict[tuple[str, int], float] = {}
    for area, series in index.by_area().items():
        for year, value in series.items():
            window = [series.get(year + i) for i in range(horizon + 1)]
            if any(v is None for v in window) or value <= 0:
                continue
            levels = np.array(window, dtype=float)
            annual = levels[1:] / levels[:-1] - 1.0
            cumulative = levels[-1] / levels[0] - 1.0
            sd = float(np.std(annual, ddof=1))
            if sd < sigma_floor:
                if tally is not None:
                    tally["risk_adjusted_target.sigma_floored"] += 1
                sd = sigma_floor
            raw[(area, year)] = cumulative / sd

    years_present = sorted({year for _, year in raw})
    stat_years = [y for y in years_present if train_years is None or y in train_years]
    stats: dict[int, tuple[float, float]] = {}
    for year in stat_years:
        values = np.array([v for (_, y), v in raw.items() if y == year])
        stats[year] = (float(values.mean()), float(values.std()))

    data: dict[tuple[str, int], float] = {}
    for (area, year), value in raw.items():
        if year in stats:
            mean, sd = stats[year]
        elif stats:
            # later (test) anchors reuse the freshest frozen statistics
            mean, sd = stats[max(stats)]
        else:
            raise ValueError("no training years available for normalization")
        if sd <= 0.0:
            if tally is not None:
                tally["risk_adjusted_target.zero_variance_year"] += 1
            data[(area, year)] = 0.0
        else:
            data[(area, year)] = (value - mean) / sd
    panel = Panel(name="risk_adjusted_target", data=data, unit="z-score", kind="flow")
    return panel, stats


# ----------------------------------------------------------------------
# Window assembly
# ----------------------------------------------------------------------


def build_windows(
    feature_panels: Mapping[str, Panel],
    target: Panel,
    population: Panel,
    centroids: Mapping[str, tuple[float, float]],
    config: WindowConfig | None = None,
    tally: Counter | None = None,
) -> tuple[list[WindowSample], list[str]]:
    """Assemble one sample per (area, anchor) with a complete own-feature
    window and an available target.

    Columns: own features in ``feature_panels`` order, then for each of the
    k nearest neighbours (ascending distance) a distance column followed by
    that neighbour's feature columns. Missing neighbour cells are masked and
    zero-filled; missing own cells drop the sample unless
    ``allow_short_windows`` permits front-padding.
    """
    if config is None:
        config = WindowConfig()
    own_names = list(feature_panels)
    if config.n_neighbours > 0:
        for feat in config.neighbour_features:
            if feat not in feature_panels:
                raise ValueError(f"neighbour feature {feat!r} is not an own feature")
    columns = list(own_names)
    for j in range(1, config.n_neighbours + 1):
        columns.append(f"neighbor{j}_distance")
        columns.extend(f"neighbor{j}_{feat}" for feat in config.neighbour_features)

    areas = sorted(set(target.areas()) | {a for p in feature_panels.values() for a in p.areas()})
    neighbor_map = (
        knn_neighbors(centroids, areas, config.n_neighbours) if config.n_neighbours > 0 else {a: () for a in areas}
    )
    own_by_panel = {name: p.by_area() for name, p in feature_panels.items()}
    pop_by_area = population.by_area()

    lookback = config.lookback
    samples: list[WindowSample] = []
    for (area, anchor), target_value in sorted(target.data.items()):
        years = list(range(anchor - lookback + 1, anchor + 1))
        own = np.zeros((lookback, len(own_names)))
        own_present = np.zeros((lookback, len(own_names)), dtype=bool)
        for c, name in enumerate(own_names):
            series = own_by_panel[name].get(area, {})
            for r, year in enumerate(years):
                value = series.get(year)
                if value is not None:
                    own[r, c] = value
                    own_present[r, c] = True
        complete_rows = own_present.all(axis=1)
        if not complete_rows.all():
            if not config.allow_short_windows:
                _bump(tally, "build_windows.incomplete_own_features")
                continue
            # acceptable shape: an incomplete prefix with a complete suffix
            n_tail = 0
            for r in range(lookback - 1, -1, -1):
                if complete_rows[r]:
                    n_tail += 1
                else:
                    break
            if n_tail < config.min_window_rows or own_present[: lookback - n_tail].any():
                _bump(tally, "build_windows.incomplete_own_features")
                continue
            own[: lookback - n_tail] = 0.0
            pad_mask = np.zeros((lookback, len(own_names)), dtype=bool)
            pad_mask[lookback - n_tail :] = True
            own_present = pad_mask

        features = np.zeros((lookback, len(columns)))
        mask = np.zeros((lookback, len(columns)), dtype=bool)
        features[:, : len(own_names)] = own
        mask[:, : len(own_names)] = own_present

        col = len(own_names)
        for code, dist in neighbor_map[area]:
            features[:, col] = dist
            mask[:, col] = True
            col += 1
            for feat in config.neighbour_features:
                series = own_by_panel[feat].get(code, {})
                for r, year in enumerate(years):
                    value = series.get(year)
                    if value is not None:
                        features[r, col] = value
                        mask[r, col] = True
                    else:
                        _bump(tally, "build_windows.neighbor_cell_masked")
                col += 1

        pop_series = pop_by_area.get(area, {})
        known = [y for y in pop_series if y <= anchor]
        if known:
            weight = population_weight(pop_series[max(known)])
        else:
            weight = 1.0
            _bump(tally, "build_windows.missing_population")

        samples.append(
            WindowSample(
                area_code=area,
                anchor_year=anchor,
                features=features,
                mask=mask,
                target=float(target_value),
                weight=weight,
            )
        )
    return samples, columns


def _bump(tally: Counter | None, reason: str) -> None:
    if tally is not None:
        tally[reason] += 1


def prepare_dataset(
    feature_panels: Mapping[str, Panel],
    index: Panel,
    population: Panel,
    centroids: Mapping[str, tuple[float, float]],
    window_config: WindowConfig | None = None,
    split: SplitSpec | None = None,
    horizon: int = 4,
    sigma_floor: float = 0.01,
    tally: Counter | None = None,
) -> WindowDataset:
    """Target construction + window assembly + split bookkeeping."""
    if window_config is None:
        window_config = WindowConfig()
    if split is None:
        split = SplitSpec()
    train_years = set(range(1900, split.train_max_anchor(horizon) + 1))
    target, stats = risk_adjusted_target(
        index, horizon=horizon, sigma_floor=sigma_floor, train_years=train_years, tally=tally
    )
    samples, columns = build_windows(feature_panels, target, population, centroids, window_config, tally)
    dataset = WindowDataset(
        samples=samples,
        feature_names=columns,
        n_own_features=len(feature_panels),
        norm_stats=stats,
        horizon=horizon,
        split=split,
        window=window_config,
        sigma_floor=sigma_floor,
    )
    dataset.assert_split_hygiene()
    return dataset


# ----------------------------------------------------------------------
# Model
# ----------------------------------------------------------------------


class SinusoidalPositionalEncoding(nn.Module):
    """Fixed sin/cos position table added to the embedded sequence."""

    def __init__(self, d_model: int, max_len: int = 64):
        super().__init__()
        position = torch.arange(max_len, dtype=torch.float32).unsqueeze(1)
        div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float32) * (-math.log(10000.0) / d_model))
        table = torch.zeros(max_len, d_model)
        table[:, 0::2] = torch.sin(position * div)
        table[:, 1::2] = torch.cos(position * div)
        self.register_buffer("table", table)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.table[: x.size(1)]


class CausalSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.out = nn.Linear(d_model, d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        q = q.view(b, t, self.n_heads, self.d_head).transpose(1, 2)
        k = k.view(b, t, self.n_heads, self.d_head).transpose(1, 2)
        v = v.view(b, t, self.n_heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool, device=x.device), diagonal=1)
        scores = scores.masked_fill(causal, float("-inf"))
        attn = self.drop(torch.softmax(scores, dim=-1))
        y = (attn @ v).transpose(1, 2).reshape(b, t, d)
        return self.out(y)


class DecoderBlock(nn.Module):
    def __init__(self, d_model: int, n_heads: int, d_hidden: int, dropout: float):
        super().__init__()
        self.attn = CausalSelfAttention(d_model, n_heads, dropout)
        self.norm1 = nn.LayerNorm(d_model)
        self.ffn = nn.Sequential(
            nn.Linear(d_model, d_hidden),
            nn.ReLU(),
            nn.Linear(d_hidden, d_model),
        )
        self.norm2 = nn.LayerNorm(d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.norm1(x + self.drop(self.attn(x)))
        return self.norm2(x + self.drop(self.ffn(x)))


class ReturnForecaster(nn.Module):
    """Embed -> positional encoding -> causal decoder stack -> last-step head."""

    def __init__(self, n_features: int, config: ModelConfig):
        super().__init__()
        self.n_features = n_features
        self.config = config
        self.embed = nn.Linear(n_features, config.d_model)
        self.positional = SinusoidalPositionalEncoding(config.d_model, max_len=max(config.lookback, 8))
        self.blocks = nn.ModuleList(
            DecoderBlock(config.d_model, config.n_heads, config.d_hidden, config.dropout)
            for _ in range(config.n_layers)
        )
        self.head = nn.Linear(config.d_model, 1)

    def forward(self, x: torch.Tensor, return_activations: bool = False):
        if x.dim() != 3 or x.size(-1) != self.n_features:
            raise ValueError(f"expected input (batch, time, {self.n_features}), got {tuple(x.shape)}")
        h = self.positional(self.embed(x))
        activations = []
        for block in self.blocks:
            h = block(h)
            if return_activations:
                activations.append(h)
        prediction = self.head(h[:, -1, :]).squeeze(-1)
        if return_activations:
            return prediction, activations
        return prediction

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def model_forward(model: ReturnForecaster, batch: np.ndarray | torch.Tensor) -> np.ndarray:
    """Eval-mode predictions, one scalar per sample."""
    tensor = torch.as_tensor(np.asarray(batch), dtype=next(model.parameters()).dtype)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model(tensor)
    finally:
        model.train(was_training)
    return out.detach().cpu().numpy()


def weighted_loss(pred: torch.Tensor, target: torch.Tensor, weight: torch.Tensor) -> torch.Tensor:
    """Population-weighted mean squared error: sum(w e^2) / sum(w)."""
    if not (pred.shape == target.shape == weight.shape):
        raise ValueError("pred, target, and weight must have identical shapes")
    if bool((weight <= 0).any()):
        raise ValueError("weights must be positive")
    return (weight * (pred - target) ** 2).sum() / weight.sum()


# ----------------------------------------------------------------------
# Training and evaluation
# ----------------------------------------------------------------------


@dataclass
class TrainedModel:
    """Trained network plus everything needed to reuse it."""

    config: ModelConfig
    feature_names: list[str]
    n_own_features: int
    norm_stats: dict[int, tuple[float, float]]
    model: ReturnForecaster
    history: list[dict] = field(default_factory=list)
    window: WindowConfig = field(default_factory=WindowConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    sigma_floor: float = 0.01

    def predict(self, samples: Sequence[WindowSample]) -> np.ndarray:
        batch = np.stack([s.features for s in samples]).astype(np.float32)
        return model_forward(self.model, batch)

    def save(self, path: str | Path) -> None:
        meta = {
            "config": self.config.to_dict(),
            "feature_names": self.feature_names,
            "n_own_features": self.n_own_features,
            "norm_stats": {str(k): list(v) for k, v in self.norm_stats.items()},
            "history": self.history,
            "n_features": self.model.n_features,
            "window": asdict(self.window),
            "split": asdict(self.split),
            "sigma_floor": self.sigma_floor,
        }
        arrays = {f"param::{k}": v.detach().cpu().numpy() for k, v in self.model.state_dict().items()}
        with open(path, "wb") as handle:
            np.savez(handle, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        with np.load(path, allow_pickle=False) as bundle:
            meta = json.loads(str(bundle["__meta__"]))
            state = {
                key[len("param::") :]: torch.from_numpy(bundle[key])
                for key in bundle.files
                if key.startswith("param::")
            }
        config = ModelConfig.from_dict(meta["config"])
        model = ReturnForecaster(int(meta["n_features"]), config)
        model.load_state_dict(state)
        model.eval()
        window_meta = dict(meta.get("window", {}))
        if "neighbour_features" in window_meta:
            window_meta["neighbour_features"] = tuple(window_meta["neighbour_features"])
        return cls(
            config=config,
            feature_names=list(meta["feature_names"]),
            n_own_features=int(meta["n_own_features"]),
            norm_stats={int(k): (float(v[0]), float(v[1])) for k, v in meta["norm_stats"].items()},
            model=model,
            history=list(meta["history"]),
            window=WindowConfig(**window_meta),
            split=SplitSpec(**meta.get("split", {})),
            sigma_floor=float(meta.get("sigma_floor", 0.01)),
        )


def _to_tensors(samples: Sequence[WindowSample]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    x = torch.tensor(np.stack([s.features for s in samples]), dtype=torch.float32)
    y = torch.tensor([s.target for s in samples], dtype=torch.float32)
    w = torch.tensor([s.weight for s in samples], dtype=torch.float32)
    return x, y, w


def train(dataset: WindowDataset, config: ModelConfig, seed: int) -> TrainedModel:
    """Train with AdamW (decoupled weight decay) under a fixed seed.

    Single-threaded and deterministic: the same dataset, config, and seed
    reproduce the loss trajectory exactly. Raises
    :class:`TrainingDivergedError` if the loss goes non-finite.
    """
    train_samples = dataset.train_samples()
    if not train_samples:
        raise ValueError("no training samples before the split boundary")
    dataset.assert_split_hygiene()
    test_samples = dataset.test_samples()

    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        torch.manual_seed(seed)
        model = ReturnForecaster(len(dataset.feature_names), config)
        optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
        shuffler = torch.Generator().manual_seed(seed)

        x, y, w = _to_tensors(train_samples)
        test_tensors = _to_tensors(test_samples) if test_samples else None

        history: list[dict] = []
        n = len(train_samples)
        for epoch in range(config.epochs):
            model.train()
            order = torch.randperm(n, generator=shuffler)
            weighted_sq = 0.0
            weight_sum = 0.0
            for lo in range(0, n, config.batch_size):
                idx = order[lo : lo + config.batch_size]
                optimizer.zero_grad()
                pred = model(x[idx])
                loss = weighted_loss(pred, y[idx], w[idx])
                if not torch.isfinite(loss):
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch}, batch offset {lo}; "
                        f"lr={config.learning_rate}, weight_decay={config.weight_decay}"
                    )
                loss.backward()
                optimizer.step()
                batch_w = float(w[idx].sum())
                weighted_sq += float(loss.detach()) * batch_w
                weight_sum += batch_w
            record = {"epoch": epoch, "train_loss": weighted_sq / weight_sum}
            if test_tensors is not None:
                model.eval()
                with torch.no_grad():
                    tx, ty, tw = test_tensors
                    record["test_loss"] = float(weighted_loss(model(tx), ty, tw))
            history.append(record)
        model.eval()
    finally:
        torch.set_num_threads(n_threads)

    return TrainedModel(
        config=config,
        feature_names=list(dataset.feature_names),
        n_own_features=dataset.n_own_features,
        norm_stats=dict(dataset.norm_stats),
        model=model,
        history=history,
        window=dataset.window if dataset.window is not None else WindowConfig(),
        split=dataset.split,
        sigma_floor=dataset.sigma_floor,
    )


def evaluate_r2(trained: TrainedModel, samples: Sequence[WindowSample]) -> float:
    """Out-of-sample R-squared: 1 - SS_res / SS_tot over ``samples``."""
    if not samples:
        raise ValueError("empty evaluation set")
    predictions = trained.predict(samples)
    targets = np.array([s.target for s in samples])
    ss_tot = float(np.sum((targets - targets.mean()) ** 2))
    if ss_tot <= 0.0:
        raise ValueError("zero test-target variance: R-squared undefined")
    ss_res = float(np.sum((targets - predictions) ** 2))
    return 1.0 - ss_res / ss_tot


# ----------------------------------------------------------------------
# Decile behaviour report
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DecileTrajectory:
    variable: str
    group: str  # "top" | "bottom"
    area_code: str
    anchor_year: int
    years: tuple[int, ...]
    values: tuple[float, ...]


@dataclass
class DecileReport:
    trajectories: list[DecileTrajectory]

    def variables(self) -> list[str]:
        seen: list[str] = []
        for t in self.trajectories:
            if t.variable not in seen:
                seen.append(t.variable)
        return seen

    def for_variable(self, variable: str) -> list[DecileTrajectory]:
        return [t for t in self.trajectories if t.variable == variable]


def decile_report(
    trained: TrainedModel,
    samples: Sequence[WindowSample],
    n_samples: int = 10,
    seed: int = 0,
    variables: Sequence[str] | None = None,
) -> DecileReport:
    """Input trajectories for draws from the top and bottom output deciles.

    The emitted values are exactly the selected samples' window rows, one
    bundle per own-feature variable.
    """
    if len(samples) < 20:
        raise ValueError(f"decile report needs >= 20 samples, got {len(samples)}")
    if variables is None:
        variables = trained.feature_names[: trained.n_own_features]
    outputs = trained.predict(samples)
    top_cut = float(np.quantile(outputs, 0.9))
    bottom_cut = float(np.quantile(outputs, 0.1))
    top_idx = [i for i, v in enumerate(outputs) if v >= top_cut]
    bottom_idx = [i for i, v in enumerate(outputs) if v <= bottom_cut]

    rng = np.random.default_rng(seed)
    picks: list[tuple[str, int]] = []
    for group, pool in (("top", top_idx), ("bottom", bottom_idx)):
        take = min(n_samples, len(pool))
        chosen = rng.choice(len(pool), size=take, replace=False)
        picks.extend((group, pool[int(c)]) for c in sorted(chosen))

    lookback = samples[0].features.shape[0]
    trajectories: list[DecileTrajectory] = []
    for variable in variables:
        col = trained.feature_names.index(variable)
        for group, i in picks:
            s = samples[i]
            years = tuple(range(s.anchor_year - lookback + 1, s.anchor_year + 1))
            trajectories.append(
                DecileTrajectory(
                    variable=variable,
                    group=group,
                    area_code=s.area_code,
                    anchor_year=s.anchor_year,
                    years=years,
                    values=tuple(float(v) for v in s.features[:, col]),
                )
            )
    return DecileReport(trajectories=trajectories)
