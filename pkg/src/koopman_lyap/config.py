"""Experiment configuration: YAML in, fully resolved YAML out."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .exceptions import ConfigError

MODES = ("spectrum", "lyapunov", "trend", "predict")
RNG_ALGORITHM = "numpy.random.PCG64 seeded with [seed, trajectory_index]"


@dataclass
class SystemConfig:
    name: str = "lienard"
    params: dict = field(default_factory=dict)


@dataclass
class KernelConfig:
    k: int = 1
    scale: float = 2.0


@dataclass
class GridConfig:
    lo: list = field(default_factory=lambda: [-1.5, -1.5])
    hi: list = field(default_factory=lambda: [1.5, 1.5])
    per_dim: int = 41


@dataclass
class OracleConfig:
    tol: float = 1e-8
    t_max: int = 10_000
    degree_max: int = 8


@dataclass
class TrendConfig:
    sample_sizes: list = field(default_factory=lambda: [10, 30, 50])


@dataclass
class PredictConfig:
    initial_states: list = field(default_factory=lambda: [[1.0, 1.0]])
    steps: int = 25


@dataclass
class ExperimentConfig:
    mode: str = "lyapunov"
    system: SystemConfig = field(default_factory=SystemConfig)
    delta: float = 0.2
    n_traj: int = 50
    horizon: float = 5.0
    seed: int = 0
    rng: str = RNG_ALGORITHM
    kernel: KernelConfig = field(default_factory=KernelConfig)
    ridge: float = 1e-8
    krr_lambdas: Any = 1e-6
    decay: str = "norm_squared"
    grid: GridConfig = field(default_factory=GridConfig)
    fill_grid_per_dim: int = 100
    slack_fraction: float = 0.05
    probe: Any = None
    oracle: OracleConfig = field(default_factory=OracleConfig)
    trend: TrendConfig = field(default_factory=TrendConfig)
    predict: PredictConfig = field(default_factory=PredictConfig)
    outputs: str = "runs/out"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        return _build(cls, data or {}, "config")

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rng != RNG_ALGORITHM:
            raise ConfigError(f"only the generator {RNG_ALGORITHM!r} is supported")
        if self.decay != "norm_squared":
            raise ConfigError(f"unknown decay {self.decay!r}; only 'norm_squared' ships")
        _require(self.delta > 0, "delta must be positive")
        _require(self.horizon >= self.delta, "horizon must be at least delta")
        _require(isinstance(self.n_traj, int) and self.n_traj >= 1, "n_traj must be a positive integer")
        _require(isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "seed must be an unsigned 64-bit integer")
        _require(self.ridge >= 0, "ridge must be non-negative")
        _require(self.grid.per_dim >= 2, "grid.per_dim must be at least 2")
        _require(len(self.grid.lo) == len(self.grid.hi), "grid.lo and grid.hi must have equal length")
        _require(self.fill_grid_per_dim >= 2, "fill_grid_per_dim must be at least 2")
        _require(self.slack_fraction >= 0, "slack_fraction must be non-negative")
        if self.mode == "trend":
            sizes = self.trend.sample_sizes
            _require(len(sizes) >= 3, "trend mode needs at least 3 sample sizes")
            _require(all(isinstance(s, int) and s >= 1 for s in sizes), "sample sizes must be positive integers")
            _require(all(a < b for a, b in zip(sizes, sizes[1:])), "sample sizes must be strictly increasing")
        if self.mode == "predict":
            _require(len(self.predict.initial_states) >= 1, "predict mode needs initial states")
            _require(isinstance(self.predict.steps, int) and self.predict.steps >= 0,
                     "predict.steps must be a non-negative integer")
        return self


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _as_float(value, where: str) -> float:
    # YAML 1.1 reads "1e-8" (no dot) as a string
    if isinstance(value, bool):
        raise ConfigError(f"{where} must be a number")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a number, got {value!r}") from None


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        ftype = fields[name].type
        sub = _NESTED.get(ftype)
        if sub is not None:
            kwargs[name] = _build(sub, value or {}, f"{where}.{name}")
        elif ftype == "float":
            kwargs[name] = _as_float(value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


_NESTED = {
    "SystemConfig": SystemConfig,
    "KernelConfig": KernelConfig,
    "GridConfig": GridConfig,
    "OracleConfig": OracleConfig,
    "TrendConfig": TrendConfig,
    "PredictConfig": PredictConfig,
}


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)
