"""Stage and end-to-end metrics for a two-stage cascade, plus report tables."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .cascade import CascadePipeline
from .dataset import Dataset

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class StageMetrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        return harmonic_f1(self.precision, self.recall)


def harmonic_f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def precision_recall_f1(predictions: Sequence[int], labels: Sequence[int]) -> StageMetrics:
    pred = np.asarray(predictions).astype(bool)
    y = np.asarray(labels).astype(bool)
    if pred.shape != y.shape:
        raise ValueError(f"{pred.size} predictions vs {y.size} labels")
    if y.size == 0:
        raise ValueError("metrics of an empty sample are undefined")
    return StageMetrics(tp=int(np.sum(pred & y)), fp=int(np.sum(pred & ~y)),
                        fn=int(np.sum(~pred & y)), tn=int(np.sum(~pred & ~y)))


def compose_e2e(r_pre: float, p_main: float, r_main: float) -> tuple[float, float, float]:
    """Pipeline (precision, recall, F1) from stage metrics.

    Every final positive went through both gates, so the pipeline keeps the
    second stage's precision and multiplies the recalls.
    """
    r_e2e = r_pre * r_main
    return p_main, r_e2e, harmonic_f1(p_main, r_e2e)


def relative_improvement(baseline_f1: float, treatment_f1: float) -> float:
    if baseline_f1 <= 0:
        raise ValueError("relative improvement needs a positive baseline")
    return (treatment_f1 - baseline_f1) / baseline_f1


@dataclass(frozen=True)
class PipelineReport:
    strategy: str
    split: str
    n_samples: int
    n_positive: int
    th_pre: float
    th_main: float
    pass_rate: float
    main_calls: int
    p_pre: float
    r_pre: float
    p_main: float
    r_main: float
    p_e2e: float
    r_e2e: float
    f1_e2e: float

    def to_dict(self) -> dict:
        d = {"schema_version": REPORT_SCHEMA_VERSION}
        d.update(asdict(self))
        # JSON has no infinity; an open gate is stored as null
        if d["th_pre"] == -math.inf:
            d["th_pre"] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineReport":
        validate_report_dict(d)
        kwargs = {f.name: d[f.name] for f in fields(cls)}
        if kwargs["th_pre"] is None:
            kwargs["th_pre"] = -math.inf
        return cls(**kwargs)


def validate_report_dict(d: dict) -> None:
    """Raise ValueError unless ``d`` is a complete, finite report of this schema."""
    if d.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ValueError(f"unknown report schema version {d.get('schema_version')!r}")
    expected = {f.name for f in fields(PipelineReport)} | {"schema_version"}
    missing, extra = expected - d.keys(), d.keys() - expected
    if missing or extra:
        raise ValueError(f"report keys mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
    for f in fields(PipelineReport):
        v = d[f.name]
        if f.name in ("strategy", "split"):
            if not isinstance(v, str):
                raise ValueError(f"{f.name} must be a string")
        elif f.name == "th_pre" and v is None:
            continue
        elif not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise ValueError(f"{f.name} must be a finite number, got {v!r}")


def report_from_scores(labels, pre_scores, main_scores, th_pre: float, th_main: float,
                       strategy: str = "", split: str = "") -> PipelineReport:
    """Report from per-sample scores.

    ``main_scores`` only needs valid entries where the pre gate passes
    (others are ignored), mirroring a cascade that never calls the second
    stage on rejected samples.
    """
    y = np.asarray(labels).astype(bool)
    if y.size == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    if not y.any():
        raise ValueError("evaluation set has no positive labels")
    pre_scores = np.asarray(pre_scores, dtype=np.float64)
    passed = pre_scores > th_pre
    main_pos = np.zeros_like(passed)
    main_pos[passed] = np.asarray(main_scores, dtype=np.float64)[passed] > th_main

    pre = precision_recall_f1(passed, y)
    main = precision_recall_f1(main_pos[passed], y[passed]) if passed.any() else StageMetrics(0, 0, 0, 0)
    e2e = precision_recall_f1(main_pos, y)
    return PipelineReport(
        strategy=strategy, split=split, n_samples=int(y.size), n_positive=int(y.sum()),
        th_pre=float(th_pre), th_main=float(th_main),
        pass_rate=float(passed.mean()), main_calls=int(passed.sum()),
        p_pre=pre.precision, r_pre=pre.recall, p_main=main.precision, r_main=main.recall,
        p_e2e=e2e.precision, r_e2e=e2e.recall, f1_e2e=e2e.f1)


def evaluate_pipeline(p: CascadePipeline, d: Dataset, strategy: str = "", split: str = "") -> PipelineReport:
    pre_scores = p.pre.score_texts(d.texts)
    passed = np.flatnonzero(pre_scores > p.th_pre)
    main_scores = np.full(len(d), np.nan)
    if passed.size:
        main_scores[passed] = p.main.score_texts([d.samples[i].text for i in passed])
    return report_from_scores(d.labels, pre_scores, main_scores, p.th_pre, p.th_main, strategy, split)


# --------------------------------------------------------------------------
# tables

COMPARE_COLUMNS = ("strategy", "split", "pass_rate", "main_calls", "r_pre", "p_main", "r_main", "f1_e2e")
FEWSHOT_COLUMNS = ("fraction", "strategy", "p_pre", "r_pre", "p_main", "r_main", "r_e2e", "f1_e2e", "improvement")


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return "" if v is None else str(v)


def format_table(rows: Iterable[dict], columns: Sequence[str]) -> str:
    rows = [[_cell(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(r[i]) for r in rows]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows)
    return "\n".join(lines) + "\n"


def table_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([repr(r[c]) if isinstance(r.get(c), float) else _cell(r.get(c)) for c in columns])
    return buf.getvalue()
