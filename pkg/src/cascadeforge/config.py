"""Experiment configuration: a YAML file mapped onto nested dataclasses.

Every section is optional and falls back to the dataclass defaults. Unknown
keys anywhere are errors. A single top-level ``seed`` drives splitting,
synthetic generation, subsampling, model training and the GA.
"""
from __future__ import annotations

import dataclasses
from dataclasses import MISSING, dataclass, fields
from typing import Any

import yaml

from .dataset import SYNTHETIC_MAIN_ONLY_PATTERN, SyntheticSpec
from .features import FeatureConfig
from .ga import GaConfig
from .linear_model import TrainConfig
from .training import FEWSHOT_MODES, STRATEGIES, StrategyConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CsvSource:
    path: str
    label_column: str = "label"
    text_column: str = "text"
    min_tokens: int = 0


@dataclass(frozen=True)
class StageSettings:
    learning_rate: float = 0.1
    epochs: int = 50
    l2: float = 1e-4
    batch_size: int = 64
    class_balanced: bool = False
    binary: bool = False
    drop_pattern: str | None = None
    k: int = 2000


@dataclass(frozen=True)
class GaSettings:
    population_size: int = 20
    generations: int = 30
    crossover_prob: float = 0.7
    mutation_prob: float = 0.1
    mutation_sigma_fraction: float = 0.1
    tournament_k: int = 3
    elitism_count: int = 1


@dataclass(frozen=True)
class FewshotSettings:
    fractions: tuple[float, ...] = (0.01, 0.02, 0.05, 0.1)
    mode: str = "pre-only"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    csv: CsvSource | None = None
    synthetic: SyntheticSpec | None = None
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    strategies: tuple[str, ...] = STRATEGIES
    target_pass_rate: float = 0.3
    pass_rates: tuple[float, ...] = (0.2, 0.3, 0.4, 0.5)
    pre: StageSettings = StageSettings(class_balanced=True, k=2000)
    main: StageSettings = StageSettings(k=20000)
    ga: GaSettings = GaSettings()
    fewshot: FewshotSettings = FewshotSettings()
    compose_class_weights: bool = True
    cross_fit_folds: int = 0
    output_dir: str = "runs/experiment"

    def __post_init__(self):
        if self.csv is not None and self.synthetic is not None:
            raise ConfigError("give either csv or synthetic data, not both")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; choose from {STRATEGIES}")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("strategies must not repeat")
        if len(self.split) != 3 or any(r <= 0 for r in self.split):
            raise ConfigError("split needs three positive ratios (train, val, test)")
        if not self.pass_rates:
            raise ConfigError("pass_rates must not be empty")
        for r in (self.target_pass_rate, *self.pass_rates):
            if not 0 < r <= 1:
                raise ConfigError(f"pass rates must be in (0, 1], got {r}")
        if not self.fewshot.fractions:
            raise ConfigError("fewshot.fractions must not be empty")
        for f in self.fewshot.fractions:
            if not 0 < f <= 1:
                raise ConfigError(f"fewshot fractions must be in (0, 1], got {f}")
        if self.fewshot.mode not in FEWSHOT_MODES:
            raise ConfigError(f"fewshot.mode must be one of {FEWSHOT_MODES}")
        # fail fast on values the library would reject later
        try:
            self.ga_config()
            for s in self.strategies:
                self.strategy_config(s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, seed=seed)

    def train_config(self, stage: StageSettings) -> TrainConfig:
        return TrainConfig(learning_rate=stage.learning_rate, epochs=stage.epochs, l2=stage.l2,
                           batch_size=stage.batch_size, class_balanced=stage.class_balanced, seed=self.seed)

    def ga_config(self) -> GaConfig:
        return GaConfig(seed=self.seed, **dataclasses.asdict(self.ga))

    def strategy_config(self, strategy: str, target_pass_rate: float | None = None,
                        fewshot_fraction: float = 1.0) -> StrategyConfig:
        return StrategyConfig(
            strategy=strategy,
            pre=self.train_config(self.pre), main=self.train_config(self.main),
            target_pass_rate=self.target_pass_rate if target_pass_rate is None else target_pass_rate,
            ga=self.ga_config() if strategy == "feedback" else None,
            k_pre=self.pre.k, k_main=self.main.k,
            pre_features=FeatureConfig(self.pre.binary, self.pre.drop_pattern),
            main_features=FeatureConfig(self.main.binary, self.main.drop_pattern),
            fewshot_fraction=fewshot_fraction, fewshot_mode=self.fewshot.mode, seed=self.seed,
            compose_class_weights=self.compose_class_weights, cross_fit_folds=self.cross_fit_folds)

    def to_dict(self) -> dict:
        """Fully materialized config; loading it back gives an equal config."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                v = {k: list(x) if isinstance(x, tuple) else x for k, x in dataclasses.asdict(v).items()}
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)


_SECTIONS = {"csv": CsvSource, "synthetic": SyntheticSpec, "pre": StageSettings, "main": StageSettings,
             "ga": GaSettings, "fewshot": FewshotSettings}
_TUPLES = {"split", "strategies", "pass_rates"}


def _check_type(value, default, where: str) -> None:
    """Reject values whose type clearly disagrees with the field default."""
    if default is MISSING or default is None or isinstance(default, tuple):
        return
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}")


def _section(cls, raw: Any, where: str, base=None):
    if raw is None:
        return base
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed {sorted(known)}")
    for f in fields(cls):
        if f.name in raw:
            _check_type(raw[f.name], f.default, f"{where}.{f.name}")
    values = dataclasses.asdict(base) if base is not None else {}
    values.update(raw)
    for f in fields(cls):
        if isinstance(values.get(f.name), list):
            values[f.name] = tuple(values[f.name])
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(raw: dict | None) -> ExperimentConfig:
    raw = dict(raw or {})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}; allowed {sorted(known)}")
    defaults = ExperimentConfig()
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kwargs[key] = _section(_SECTIONS[key], value, key, getattr(defaults, key))
        elif key in _TUPLES:
            if not isinstance(value, list):
                raise ConfigError(f"{key}: expected a list")
            kwargs[key] = tuple(value)
        else:
            _check_type(value, getattr(defaults, key), key)
            kwargs[key] = value
    # a bare "synthetic:" line means the default spec
    if "synthetic" in raw and raw["synthetic"] is None and raw.get("csv") is None:
        kwargs["synthetic"] = SyntheticSpec()
    # the first stage must not see the second stage's private features
    if kwargs.get("synthetic") is not None and "drop_pattern" not in (raw.get("pre") or {}):
        kwargs["pre"] = dataclasses.replace(kwargs.get("pre", defaults.pre),
                                            drop_pattern=SYNTHETIC_MAIN_ONLY_PATTERN)
    if kwargs.get("csv") is None and kwargs.get("synthetic") is None:
        raise ConfigError("the config needs a data source: a csv or a synthetic section")
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw)
