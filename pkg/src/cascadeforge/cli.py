"""Command-line experiment runner.

Every command that writes results lays them out under one run directory::

    <out>/config.yaml                 resolved config minus output_dir
    <out>/<strategy>/pipeline/        saved cascade
    <out>/<strategy>/report.<split>.json
    <out>/<strategy>/ga_history.csv   feedback only
    <out>/<command>.txt, <command>.csv

Nothing time- or host-dependent is written, so reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Sequence

import yaml

from .cascade import CascadePipeline
from .config import ConfigError, ExperimentConfig, load_config
from .dataset import Dataset, DatasetError, SyntheticSpec, generate_synthetic, load_csv, save_csv, split
from .evaluation import (
    COMPARE_COLUMNS, FEWSHOT_COLUMNS, PipelineReport, evaluate_pipeline, format_table, relative_improvement,
    table_csv,
)
from .linear_model import TrainingError
from .training import STRATEGIES, StrategyError, TrainingResult, train_strategy

log = logging.getLogger("cascadeforge")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
SPLIT_NAMES = ("train", "val", "test")
SWEEP_COLUMNS = ("target_pass_rate",) + COMPARE_COLUMNS


class RunError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# plumbing

def _setup_logging() -> None:
    level = os.environ.get("CASCADEFORGE_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        raise ConfigError(f"CASCADEFORGE_LOG: unknown log level {level!r}")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _snapshot(cfg: ExperimentConfig, out: str) -> None:
    # output_dir is left out so runs in different directories diff cleanly
    d = cfg.to_dict()
    del d["output_dir"]
    _write(os.path.join(out, "config.yaml"), yaml.safe_dump(d, sort_keys=True, default_flow_style=False))


def _resolve_config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out:
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    log.info("resolved config:\n%s", cfg.to_yaml())
    return cfg


def load_data(cfg: ExperimentConfig) -> Dataset:
    if cfg.csv is not None:
        c = cfg.csv
        return load_csv(c.path, c.label_column, c.text_column, c.min_tokens)
    return generate_synthetic(cfg.synthetic, seed=cfg.seed)


def load_splits(cfg: ExperimentConfig) -> dict[str, Dataset]:
    return dict(zip(SPLIT_NAMES, split(load_data(cfg), cfg.split, seed=cfg.seed)))


def _train(splits: dict[str, Dataset], cfg: ExperimentConfig, strategy: str, threads: int,
           **overrides) -> TrainingResult:
    scfg = cfg.strategy_config(strategy, **overrides)
    try:
        return train_strategy(splits["train"], splits["val"], scfg, threads=threads)
    except (StrategyError, TrainingError, DatasetError) as exc:
        raise RunError(f"{strategy} training failed: {exc}") from exc


def _save_result(res: TrainingResult, directory: str) -> None:
    res.pipeline.save(os.path.join(directory, "pipeline"))
    if res.ga is not None:
        res.ga.write_history_csv(os.path.join(directory, "ga_history.csv"))
    if res.weight_params is not None:
        _write(os.path.join(directory, "weight_params.json"),
               json.dumps(res.weight_params.to_dict(), indent=2, sort_keys=True) + "\n")


def _report(res: TrainingResult, d: Dataset, split_name: str, directory: str) -> PipelineReport:
    rep = evaluate_pipeline(res.pipeline, d, res.strategy, split_name)
    _write(os.path.join(directory, f"report.{split_name}.json"), rep.to_json())
    return rep


def _check_fairness(reports: Sequence[PipelineReport], n_val: int) -> None:
    rates = [r.pass_rate for r in reports]
    if rates and max(rates) - min(rates) > 1 / n_val + 1e-12:
        log.warning("validation pass rates differ by more than 1/|val|: %s", rates)


def _compare_run(splits, cfg: ExperimentConfig, out: str, threads: int, rate: float) -> list[dict]:
    """Train every configured strategy at one pass rate; returns table rows (val, then test)."""
    by_split: dict[str, list[PipelineReport]] = {"val": [], "test": []}
    for strategy in cfg.strategies:
        res = _train(splits, cfg, strategy, threads, target_pass_rate=rate)
        directory = os.path.join(out, strategy)
        _save_result(res, directory)
        for name in by_split:
            by_split[name].append(_report(res, splits[name], name, directory))
    _check_fairness(by_split["val"], len(splits["val"]))
    return [r.to_dict() for name in by_split for r in by_split[name]]


def _sectioned(rows: list[dict], key: str, columns, title) -> str:
    parts = []
    for value in dict.fromkeys(r[key] for r in rows):
        parts.append(f"{title(value)}\n" + format_table([r for r in rows if r[key] == value], columns))
    return "\n".join(parts)


# --------------------------------------------------------------------------
# commands

def cmd_gen_data(args) -> int:
    base = SyntheticSpec()
    if args.config:
        cfg = load_config(args.config)
        if cfg.synthetic is None:
            raise ConfigError(f"{args.config} has no synthetic section")
        base = cfg.synthetic
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(SyntheticSpec)
                 if getattr(args, f.name) is not None}
    try:
        spec = dataclasses.replace(base, **overrides)
    except DatasetError as exc:
        raise ConfigError(f"invalid synthetic spec: {exc}") from exc
    seed = 0 if args.seed is None else args.seed
    path = args.out or "synthetic.csv"
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    d = generate_synthetic(spec, seed=seed)
    save_csv(d, path)
    print(f"wrote {len(d)} samples ({d.n_positive} positive) to {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = cfg.output_dir
    _snapshot(cfg, out)
    splits = load_splits(cfg)
    reports = []
    for strategy in cfg.strategies:
        res = _train(splits, cfg, strategy, args.threads)
        directory = os.path.join(out, strategy)
        _save_result(res, directory)
        reports.append(_report(res, splits["val"], "val", directory))
        print(f"{strategy}: pipeline saved to {os.path.join(directory, 'pipeline')}")
    _check_fairness(reports, len(splits["val"]))
    print(format_table([r.to_dict() for r in reports], COMPARE_COLUMNS), end="")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.pipeline:
        raise ConfigError("evaluate needs --pipeline")
    pipeline = CascadePipeline.load(args.pipeline)
    if args.data:
        d, split_name = load_csv(args.data), os.path.basename(args.data)
    else:
        cfg = _resolve_config(args)
        d, split_name = load_splits(cfg)[args.split], args.split
    # <run>/<strategy>/pipeline layout names the strategy
    parent = os.path.dirname(os.path.normpath(args.pipeline))
    strategy = os.path.basename(parent) if os.path.basename(parent) in STRATEGIES else ""
    rep = evaluate_pipeline(pipeline, d, strategy, split_name)
    name = "data" if args.data else args.split
    _write(os.path.join(args.out or parent, f"evaluation.{name}.json"), rep.to_json())
    print(format_table([rep.to_dict()], COMPARE_COLUMNS), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    out = cfg.output_dir
    _snapshot(cfg, out)
    rows = _compare_run(load_splits(cfg), cfg, out, args.threads, cfg.target_pass_rate)
    text = _sectioned(rows, "split", COMPARE_COLUMNS, lambda s: f"split: {s}")
    _write(os.path.join(out, "compare.txt"), text)
    _write(os.path.join(out, "compare.csv"), table_csv(rows, COMPARE_COLUMNS))
    print(text, end="")
    return EXIT_OK


def cmd_sweep_passrate(args) -> int:
    cfg = _resolve_config(args)
    out = cfg.output_dir
    _snapshot(cfg, out)
    splits = load_splits(cfg)
    rows = []
    for rate in cfg.pass_rates:
        run_rows = _compare_run(splits, cfg, os.path.join(out, f"pass_rate_{rate}"), args.threads, rate)
        rows.extend(dict(r, target_pass_rate=rate) for r in run_rows if r["split"] == "test")
    text = _sectioned(rows, "target_pass_rate", COMPARE_COLUMNS, lambda r: f"pass rate {r} (test)")
    _write(os.path.join(out, "sweep.txt"), text)
    _write(os.path.join(out, "sweep.csv"), table_csv(rows, SWEEP_COLUMNS))
    print(text, end="")
    return EXIT_OK


FEWSHOT_STRATEGIES = ("independent", "feedback")


def cmd_fewshot(args) -> int:
    cfg = _resolve_config(args)
    out = cfg.output_dir
    _snapshot(cfg, out)
    splits = load_splits(cfg)
    rows, errors = [], []
    for fraction in cfg.fewshot.fractions:
        f1 = {}
        for strategy in FEWSHOT_STRATEGIES:
            directory = os.path.join(out, f"fraction_{fraction}", strategy)
            try:
                res = _train(splits, cfg, strategy, args.threads, fewshot_fraction=fraction)
            except RunError as exc:
                log.error("fraction %s: %s", fraction, exc)
                errors.append({"fraction": fraction, "strategy": strategy, "error": str(exc)})
                continue
            _save_result(res, directory)
            _report(res, splits["val"], "val", directory)
            rep = _report(res, splits["test"], "test", directory)
            f1[strategy] = rep.f1_e2e
            row = dict(rep.to_dict(), fraction=fraction, improvement=None)
            if strategy == "feedback" and f1.get("independent", 0) > 0:
                row["improvement"] = relative_improvement(f1["independent"], rep.f1_e2e)
            rows.append(row)
    text = format_table(rows, FEWSHOT_COLUMNS)
    if errors:
        text += "\nerrors\n" + "".join(f"  fraction {e['fraction']} {e['strategy']}: {e['error']}\n"
                                       for e in errors)
    summary = {"mode": cfg.fewshot.mode, "rows": [{c: r[c] for c in FEWSHOT_COLUMNS} for r in rows],
               "errors": errors}
    _write(os.path.join(out, "fewshot.txt"), text)
    _write(os.path.join(out, "fewshot.csv"), table_csv(rows, FEWSHOT_COLUMNS))
    _write(os.path.join(out, "fewshot.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(text, end="")
    return EXIT_FAILED if errors else EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "sweep-passrate": cmd_sweep_passrate,
    "fewshot": cmd_fewshot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (YAML)")
    common.add_argument("--out", help="run directory (gen-data: CSV path)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--threads", type=int, default=1, help="threads for GA fitness evaluations")

    parser = argparse.ArgumentParser(prog="cascadeforge", description="Two-stage cascade training experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("gen-data", parents=[common], help="write a synthetic corpus as CSV")
    for f in dataclasses.fields(SyntheticSpec):
        gen.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(f.default),
                         help=f"default {f.default}")
    sub.add_parser("train", parents=[common], help="train and save the configured strategies")
    ev = sub.add_parser("evaluate", parents=[common], help="evaluate a saved pipeline")
    ev.add_argument("--pipeline", help="pipeline directory")
    ev.add_argument("--data", help="CSV to evaluate on (default: a split of the config's data)")
    ev.add_argument("--split", choices=SPLIT_NAMES, default="test")
    sub.add_parser("compare", parents=[common], help="all strategies at one pass rate")
    sub.add_parser("sweep-passrate", parents=[common], help="compare at every configured pass rate")
    sub.add_parser("fewshot", parents=[common], help="independent vs feedback on subsampled data")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _setup_logging()
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except (ConfigError, DatasetError) as exc:
        print(f"cascadeforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RunError, OSError) as exc:
        print(f"cascadeforge: error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
