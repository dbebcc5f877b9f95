"""Tokenization, unigram+bigram features, chi-squared selection, sparse vectors."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset

_SPLIT = re.compile(r"[^0-9a-z]+")


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    """How text becomes features.

    ``drop_pattern`` removes whole tokens (full-match regex) before n-grams
    are formed; it is how a stage is kept blind to some of the input.
    """
    binary: bool = False
    drop_pattern: str | None = None

    def __post_init__(self):
        if self.drop_pattern is not None:
            re.compile(self.drop_pattern)


def tokenize(text: str) -> list[str]:
    return [t for t in _SPLIT.split(text.lower()) if t]


def extract_features(tokens: Sequence[str]) -> Counter:
    feats = Counter(tokens)
    feats.update(f"{a}_{b}" for a, b in zip(tokens, tokens[1:]))
    return feats


def text_features(text: str, config: FeatureConfig = FeatureConfig()) -> Counter:
    tokens = tokenize(text)
    if config.drop_pattern is not None:
        drop = re.compile(config.drop_pattern)
        tokens = [t for t in tokens if not drop.fullmatch(t)]
    feats = extract_features(tokens)
    if config.binary:
        feats = Counter(dict.fromkeys(feats, 1))
    return feats


def chi2_scores(d: Dataset, config: FeatureConfig = FeatureConfig()) -> dict[str, float]:
    """Chi-squared statistic of every feature against the label.

    O_c is the summed feature count over documents of class c and
    E_c = (O_0 + O_1) * n_c / n.
    """
    labels = d.labels
    n = len(labels)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == n:
        raise FeatureError("chi2 needs both labels in the dataset")
    observed: dict[str, list[float]] = {}
    for text, y in zip(d.texts, labels):
        for f, c in text_features(text, config).items():
            observed.setdefault(f, [0.0, 0.0])[y] += c
    if not observed:
        return {}
    names = list(observed)
    obs = np.array([observed[f] for f in names])
    prior = np.array([(n - n_pos) / n, n_pos / n])
    expected = obs.sum(axis=1, keepdims=True) * prior
    scores = ((obs - expected) ** 2 / expected).sum(axis=1)
    return {f: float(s) for f, s in zip(names, scores)}


class Vocabulary:
    """Immutable feature -> column map, indices in descending-score order."""

    def __init__(self, features: Sequence[str], scores: Sequence[float] | None = None,
                 capacity: int | None = None):
        features = list(features)
        if len(set(features)) != len(features):
            raise FeatureError("duplicate features in vocabulary")
        self._features = tuple(features)
        self._index = {f: i for i, f in enumerate(features)}
        self._scores = tuple(float(s) for s in scores) if scores is not None else (0.0,) * len(features)
        if len(self._scores) != len(features):
            raise FeatureError("scores and features differ in length")
        self.capacity = capacity if capacity is not None else len(features)
        if len(features) > self.capacity:
            raise FeatureError("vocabulary larger than its capacity")

    def __len__(self) -> int:
        return len(self._features)

    def __contains__(self, feature: str) -> bool:
        return feature in self._index

    def __getitem__(self, feature: str) -> int:
        return self._index[feature]

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._features == other._features

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} features, capacity {self.capacity})"

    @property
    def features(self) -> tuple[str, ...]:
        return self._features

    @property
    def scores(self) -> tuple[float, ...]:
        return self._scores

    def get(self, feature: str, default=None):
        return self._index.get(feature, default)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, (f, s) in enumerate(zip(self._features, self._scores)):
                fh.write(f"{f}\t{i}\t{s!r}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        feats, scores = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or int(parts[1]) != lineno - 1:
                    raise FeatureError(f"{path}: malformed vocabulary line {lineno}")
                feats.append(parts[0])
                scores.append(float(parts[2]))
        return cls(feats, scores)


def select_top_k(scores: Mapping[str, float], k: int) -> Vocabulary:
    if k < 1:
        raise FeatureError(f"k must be >= 1, got {k}")
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return Vocabulary([f for f, _ in ranked], [s for _, s in ranked], capacity=k)


def build_vocabulary(d: Dataset, k: int, config: FeatureConfig = FeatureConfig()) -> Vocabulary:
    return select_top_k(chi2_scores(d, config), k)


@dataclass(frozen=True)
class FeatureVector:
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise FeatureError("indices and values differ in length")
        if len(self.indices) > 1 and np.any(np.diff(self.indices) <= 0):
            raise FeatureError("indices must be strictly increasing")
        if np.any(self.values <= 0):
            raise FeatureError("feature values must be positive")

    def __len__(self) -> int:
        return len(self.indices)

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(v)) for i, v in zip(self.indices, self.values)]


def _sparse_row(text: str, vocab: Vocabulary, config: FeatureConfig) -> tuple[list[int], list[float]]:
    hits = sorted((vocab.get(f), float(c)) for f, c in text_features(text, config).items() if f in vocab)
    return [i for i, _ in hits], [c for _, c in hits]


def vectorize(text: str, vocab: Vocabulary, config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    idx, val = _sparse_row(text, vocab, config)
    return FeatureVector(np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=np.float64))


def vectorize_corpus(texts: Iterable[str], vocab: Vocabulary,
                     config: FeatureConfig = FeatureConfig()) -> sp.csr_matrix:
    indptr, indices, data = [0], [], []
    for text in texts:
        idx, val = _sparse_row(text, vocab, config)
        indices.extend(idx)
        data.extend(val)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(indptr) - 1, len(vocab)))
