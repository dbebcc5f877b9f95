"""Two-stage inference: a cheap gate in front of an expensive classifier."""
from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .features import FeatureConfig, Vocabulary, vectorize, vectorize_corpus
from .linear_model import LogisticModel, Scorer

MAIN_THRESHOLD = 0.5
MANIFEST_VERSION = 1


class DegenerateThresholdWarning(UserWarning):
    """Ties at the cut make the requested pass rate unattainable."""


@dataclass(frozen=True)
class Stage:
    """A scorer bundled with the featurization it was trained against."""
    scorer: Scorer
    vocab: Vocabulary
    features: FeatureConfig = FeatureConfig()

    def __post_init__(self):
        if self.scorer.dim != len(self.vocab):
            raise ValueError(f"scorer dimension {self.scorer.dim} != vocabulary size {len(self.vocab)}")

    def score(self, text: str) -> float:
        return self.scorer.score(vectorize(text, self.vocab, self.features))

    def score_texts(self, texts: Sequence[str]) -> np.ndarray:
        return self.scorer.score_matrix(vectorize_corpus(texts, self.vocab, self.features))


@dataclass(frozen=True)
class PipelinePrediction:
    pre_score: float
    main_score: float | None
    passed_pre: bool
    final_label: int

    @property
    def main_called(self) -> bool:
        return self.main_score is not None


@dataclass(frozen=True)
class CascadePipeline:
    pre: Stage
    main: Stage
    th_pre: float
    th_main: float = MAIN_THRESHOLD

    def infer(self, text: str) -> PipelinePrediction:
        return infer(self, text)

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        for name, stage in (("pre", self.pre), ("main", self.main)):
            if not isinstance(stage.scorer, LogisticModel):
                raise TypeError(f"only logistic scorers can be saved, {name} is {type(stage.scorer).__name__}")
            stage.scorer.save(os.path.join(directory, f"{name}.model"))
            stage.vocab.save(os.path.join(directory, f"{name}.vocab"))
        manifest = {
            "version": MANIFEST_VERSION,
            "th_pre": _encode_threshold(self.th_pre),
            "th_main": self.th_main,
            "pre_features": asdict(self.pre.features),
            "main_features": asdict(self.main.features),
        }
        with open(os.path.join(directory, "pipeline.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, directory) -> "CascadePipeline":
        with open(os.path.join(directory, "pipeline.json")) as fh:
            manifest = json.load(fh)
        if manifest.get("version") != MANIFEST_VERSION:
            raise ValueError(f"{directory}: unsupported pipeline manifest version {manifest.get('version')}")
        stages = {}
        for name in ("pre", "main"):
            stages[name] = Stage(LogisticModel.load(os.path.join(directory, f"{name}.model")),
                                 Vocabulary.load(os.path.join(directory, f"{name}.vocab")),
                                 FeatureConfig(**manifest[f"{name}_features"]))
        return cls(stages["pre"], stages["main"], _decode_threshold(manifest["th_pre"]),
                   float(manifest["th_main"]))


def _encode_threshold(th: float):
    return "-inf" if th == -math.inf else th


def _decode_threshold(value) -> float:
    return -math.inf if value == "-inf" else float(value)


def infer(p: CascadePipeline, text: str) -> PipelinePrediction:
    pre_score = p.pre.score(text)
    if not pre_score > p.th_pre:
        return PipelinePrediction(pre_score, None, False, 0)
    main_score = p.main.score(text)
    return PipelinePrediction(pre_score, main_score, True, int(main_score > p.th_main))


def calibrate_threshold(scores: Sequence[float], pass_rate: float) -> float:
    """Largest observed score ``th`` with at least ceil(pass_rate * n) scores above it.

    Gating is strict (``score > th``), so tied scores pass or fail together.
    Returns ``-inf`` when every score has to pass.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    if n == 0:
        raise ValueError("cannot calibrate a threshold on no scores")
    if not 0 < pass_rate <= 1:
        raise ValueError(f"pass_rate must be in (0, 1], got {pass_rate}")
    # guard the ceil against float noise such as 0.3 * 10 = 3.0000000000000004
    k = min(n, math.ceil(round(pass_rate * n, 9)))
    desc = np.sort(scores)[::-1]
    # candidate thresholds are the distinct values strictly below the k-th score
    below = desc[k:][desc[k:] < desc[k - 1]]
    th = float(below[0]) if below.size else -math.inf
    passed = int(np.count_nonzero(scores > th))
    if passed != k:
        warnings.warn(
            f"score ties at the cut: {passed} of {n} pass instead of the requested {k}",
            DegenerateThresholdWarning, stacklevel=2)
    return th


def gate_rate(scores: Sequence[float], threshold: float) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("pass rate of an empty score set is undefined")
    return float(np.count_nonzero(scores > threshold)) / scores.size


def measure_pass_rate(p: CascadePipeline, d: Dataset) -> float:
    if len(d) == 0:
        raise ValueError("cannot measure a pass rate on an empty dataset")
    return gate_rate(p.pre.score_texts(d.texts), p.th_pre)
