"""Score-based sample weights for the first-stage model.

Positives are weighted by how confidently the second stage accepts them;
negatives get a floor plus a term that grows with the second-stage score;
everything is capped at ``w_max``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

MIN_TEMPERATURE = 1e-3
A_POS = 2.0
A_NEG = 1.0


@dataclass(frozen=True)
class WeightParams:
    t_pos: float
    t_neg: float
    w_neg_min: float
    w_max: float
    a_pos: float = A_POS
    a_neg: float = A_NEG

    def __post_init__(self):
        for name in ("t_pos", "t_neg"):
            t = getattr(self, name)
            if not (math.isfinite(t) and t >= MIN_TEMPERATURE):
                raise ValueError(f"{name} must be >= {MIN_TEMPERATURE}, got {t}")
        if self.a_pos <= 0 or self.a_neg <= 0:
            raise ValueError("attention intensities must be > 0")
        if self.w_neg_min < 0:
            raise ValueError("w_neg_min must be >= 0")
        if self.w_max <= 0 or self.w_max < self.w_neg_min:
            raise ValueError("w_max must be > 0 and >= w_neg_min")

    @classmethod
    def uniform(cls, temperature: float = 1e6) -> "WeightParams":
        """Flat curves: every weight within ~0.25/temperature of 1."""
        return cls(t_pos=temperature, t_neg=temperature, w_neg_min=1 - A_NEG / 2, w_max=1.0)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def sigma(z, t: float, a: float):
    """a / (1 + exp(-z / t)), saturating cleanly for large |z / t|."""
    if t <= 0:
        raise ValueError(f"temperature must be > 0, got {t}")
    x = np.asarray(z, dtype=np.float64) / t
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, a / (1.0 + e), a * e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def sample_weight(s, label, p: WeightParams):
    """Weight of one sample (or arrays of them) from its second-stage score ``s``."""
    s = np.asarray(s, dtype=np.float64)
    label = np.asarray(label)
    if np.any((s < 0) | (s > 1)) or np.any(np.isnan(s)):
        raise ValueError("scores must lie in [0, 1]")
    pos = np.minimum(sigma(s - 0.5, p.t_pos, p.a_pos), p.w_max)
    neg = np.minimum(p.w_neg_min + sigma(s - 0.5, p.t_neg, p.a_neg), p.w_max)
    out = np.where(label == 1, pos, neg)
    return float(out) if out.ndim == 0 else out


def compute_weights(scores: Sequence[float], labels: Sequence[int], p: WeightParams) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if scores.size == 0:
        return np.zeros(0)
    return np.atleast_1d(sample_weight(scores, labels, p))
