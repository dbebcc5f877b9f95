import pytest
import yaml

from cascadeforge.config import ConfigError, ExperimentConfig, config_from_dict, load_config
from cascadeforge.dataset import SYNTHETIC_MAIN_ONLY_PATTERN, SyntheticSpec


def test_minimal_synthetic_config():
    cfg = config_from_dict({"synthetic": None})
    assert cfg.synthetic == SyntheticSpec()
    assert cfg.pre.drop_pattern == SYNTHETIC_MAIN_ONLY_PATTERN
    assert cfg.pre.class_balanced and not cfg.main.class_balanced


def test_explicit_drop_pattern_is_kept():
    cfg = config_from_dict({"synthetic": {}, "pre": {"drop_pattern": None}})
    assert cfg.pre.drop_pattern is None


def test_sections_merge_with_defaults():
    cfg = config_from_dict({"csv": {"path": "d.csv"}, "pre": {"epochs": 5}, "ga": {"generations": 2}})
    assert cfg.pre.epochs == 5 and cfg.pre.class_balanced and cfg.pre.k == 2000
    assert cfg.ga_config().generations == 2 and cfg.ga_config().population_size == 20


def test_seed_reaches_every_component():
    cfg = config_from_dict({"synthetic": {}, "seed": 7})
    s = cfg.strategy_config("feedback")
    assert s.seed == s.pre.seed == s.main.seed == s.ga.seed == 7
    assert cfg.with_seed(9).strategy_config("feedback").ga.seed == 9


@pytest.mark.parametrize("raw, match", [
    ({"synthetic": {}, "bogus": 1}, "unknown top-level"),
    ({"synthetic": {"n_sample": 10}}, "unknown keys"),
    ({"synthetic": {}, "pre": {"lr": 0.1}}, "unknown keys"),
    ({}, "data source"),
    ({"synthetic": {}, "csv": {"path": "x"}}, "either"),
    ({"synthetic": {}, "strategies": []}, "at least one"),
    ({"synthetic": {}, "strategies": ["joint"]}, "unknown strategy"),
    ({"synthetic": {}, "pass_rates": []}, "must not be empty"),
    ({"synthetic": {}, "target_pass_rate": 0}, r"\(0, 1\]"),
    ({"synthetic": {}, "fewshot": {"mode": "main-only"}}, "mode"),
    ({"synthetic": {}, "ga": {"population_size": 5}}, "even"),
    ({"synthetic": {"dim_shared": 0}}, "dim_shared"),
    ({"synthetic": {}, "pre": {"epochs": "ten"}}, "expected int"),
    ({"synthetic": {}, "seed": 1.5}, "expected int"),
    ({"synthetic": {}, "split": [0.9, 0.1]}, "three"),
])
def test_rejects(raw, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(raw)


def test_yaml_roundtrip(tmp_path):
    cfg = config_from_dict({"synthetic": {"n_samples": 300}, "seed": 3, "pass_rates": [0.2], "main": {"k": 50}})
    path = tmp_path / "c.yaml"
    path.write_text(cfg.to_yaml())
    assert load_config(path) == cfg
    csv_cfg = config_from_dict({"csv": {"path": "d.csv", "min_tokens": 2}})
    path.write_text(csv_cfg.to_yaml())
    assert load_config(path) == csv_cfg


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(bad)
    bad.write_text(yaml.safe_dump([1, 2]))
    with pytest.raises(ConfigError, match="mapping"):
        load_config(bad)


def test_default_experiment_config_is_valid():
    ExperimentConfig()
