"""Labeled text samples: CSV ingestion, stratified splitting, subsampling and a
synthetic corpus generator that mimics the score inconsistency between a weak
first-stage model and a strong second-stage model.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    id: int
    text: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DatasetError(f"sample {self.id}: label must be 0 or 1, got {self.label!r}")
        if self.id < 0:
            raise DatasetError(f"sample id must be >= 0, got {self.id}")


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise DatasetError(f"{self.name}: duplicate sample ids")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.samples]

    @property
    def labels(self) -> np.ndarray:
        return np.fromiter((s.label for s in self.samples), dtype=np.int8, count=len(self.samples))

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.samples]

    @property
    def n_positive(self) -> int:
        return int(sum(s.label for s in self.samples))

    @property
    def n_negative(self) -> int:
        return len(self.samples) - self.n_positive

    def has_both_labels(self) -> bool:
        return self.n_positive > 0 and self.n_negative > 0

    def take(self, indices: Iterable[int], name: str | None = None) -> "Dataset":
        """Dataset made of the samples at the given positions, in that order."""
        return Dataset(tuple(self.samples[i] for i in indices), name or self.name)


def load_csv(path, label_column: str = "label", text_column: str = "text",
             min_tokens: int = 0, name: str | None = None) -> Dataset:
    """Read a header-first, comma-separated UTF-8 file into a Dataset.

    Ids are assigned 0..n-1 in file order. Rows whose text has fewer than
    ``min_tokens`` tokens are dropped (ids stay contiguous over kept rows).
    """
    from .features import tokenize

    path = os.fspath(path)
    if not os.path.exists(path):
        raise DatasetError(f"no such file: {path}")
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DatasetError(f"{path}: missing header row")
        for col in (label_column, text_column):
            if col not in reader.fieldnames:
                raise DatasetError(f"{path}: missing column {col!r} (header: {reader.fieldnames})")
        # row 1 is the header
        for rownum, row in enumerate(reader, start=2):
            raw = (row[label_column] or "").strip()
            if raw not in ("0", "1"):
                raise DatasetError(f"{path}: row {rownum}: label {raw!r} is not 0 or 1")
            text = row[text_column] or ""
            if min_tokens and len(tokenize(text)) < min_tokens:
                continue
            samples.append(Sample(len(samples), text, int(raw)))
    return Dataset(tuple(samples), name or os.path.splitext(os.path.basename(path))[0])


def save_csv(d: Dataset, path, label_column: str = "label", text_column: str = "text") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([label_column, text_column])
        for s in d.samples:
            writer.writerow([s.label, s.text])


def _largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    raw = [r * total for r in ratios]
    counts = [math.floor(x) for x in raw]
    order = sorted(range(len(ratios)), key=lambda j: (-(raw[j] - counts[j]), j))
    for j in order[: total - sum(counts)]:
        counts[j] += 1
    return counts


def _stratified_order(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # shuffle within each class, then interleave by within-class quantile so any
    # contiguous cut holds each class in proportion (to within one sample)
    keys = np.empty(len(labels))
    for c in (0, 1):
        ix = np.flatnonzero(labels == c)
        perm = ix[rng.permutation(len(ix))]
        keys[perm] = (np.arange(len(ix)) + 0.5) / max(len(ix), 1)
    return np.lexsort((labels, keys))


def split(d: Dataset, ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0
          ) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified train/val/test partition, deterministic in ``seed``."""
    if len(ratios) != 3:
        raise DatasetError("ratios must have three entries (train, val, test)")
    if any(r <= 0 for r in ratios):
        raise DatasetError(f"every split ratio must be > 0, got {tuple(ratios)}")
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise DatasetError(f"split ratios must sum to 1, got {sum(ratios)}")
    if len(d) < 3:
        raise DatasetError(f"cannot split {len(d)} samples three ways")
    sizes = _largest_remainder(len(d), ratios)
    if min(sizes) < 1:
        raise DatasetError(f"ratios {tuple(ratios)} leave an empty split for {len(d)} samples")

    order = _stratified_order(d.labels, np.random.default_rng(seed))
    bounds = np.cumsum([0] + sizes)
    names = ("train", "val", "test")
    return tuple(  # type: ignore[return-value]
        d.take(sorted(order[bounds[j]:bounds[j + 1]].tolist()), f"{d.name}-{names[j]}")
        for j in range(3))


def subsample(d: Dataset, fraction: float, seed: int = 0) -> Dataset:
    """Stratified random subset of ``round(fraction * n)`` samples, original order kept."""
    if not 0 < fraction <= 1:
        raise DatasetError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return d
    n = len(d)
    target = int(round(fraction * n))
    if target < 2:
        raise DatasetError(f"fraction {fraction} of {n} samples leaves fewer than 2")
    labels = d.labels
    by_class = [np.flatnonzero(labels == c) for c in (0, 1)]
    # per-class quotas by largest remainder against the overall target
    quota = _largest_remainder(target, [len(ix) / n for ix in by_class])
    if min(quota) == 0:
        raise DatasetError(
            f"fraction {fraction} of {n} samples leaves an empty class "
            f"(negatives {quota[0]}, positives {quota[1]})")
    rng = np.random.default_rng(seed)
    keep = []
    for ix, q in zip(by_class, quota):
        keep.extend(ix[rng.permutation(len(ix))[:q]].tolist())
    return d.take(sorted(keep), f"{d.name}-sub{fraction:g}")


def filter_min_tokens(d: Dataset, min_tokens: int) -> Dataset:
    from .features import tokenize

    if min_tokens <= 0:
        return d
    return Dataset(tuple(s for s in d.samples if len(tokenize(s.text)) >= min_tokens), d.name)


# --------------------------------------------------------------------------
# synthetic corpus

@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian-cluster corpus rendered as bucket tokens.

    Populations (shared-subspace center, main-only center):

    * seen positives  (+sep, +sep/2)  -- the second stage recognises these
    * hard negatives  (+sep, -sep/2)  -- look positive to the first stage only
    * ambiguous pos/neg (-sep, 0)     -- nothing separates them; mostly rejected downstream
    * easy negatives  (0, -sep/2)

    ``hard_negative_fraction`` is the share of negatives that are hard; of
    those, ``ambiguous_share`` sit in the ambiguous cluster. Ambiguous
    positives are added so that cluster has positive rate
    ``ambiguous_positive_rate``.
    """
    n_samples: int = 5000
    dim_shared: int = 6
    dim_main_only: int = 4
    positive_fraction: float = 0.2
    hard_negative_fraction: float = 0.4
    cluster_separation: float = 1.5
    noise_sigma: float = 1.0
    ambiguous_share: float = 0.5
    ambiguous_positive_rate: float = 0.35
    n_buckets: int = 16
    bucket_range: float = 4.0
    filler_tokens: int = 6
    filler_vocab: int = 200

    def __post_init__(self):
        if self.n_samples < 10:
            raise DatasetError("n_samples must be >= 10")
        if self.dim_shared < 1:
            raise DatasetError("dim_shared must be >= 1")
        if self.dim_main_only < 0:
            raise DatasetError("dim_main_only must be >= 0")
        if not 0 < self.positive_fraction < 1:
            raise DatasetError("positive_fraction must be in (0, 1)")
        if not 0 <= self.hard_negative_fraction < 1:
            raise DatasetError("hard_negative_fraction must be in [0, 1)")
        if self.cluster_separation <= 0:
            raise DatasetError("cluster_separation must be > 0")
        if self.noise_sigma < 0:
            raise DatasetError("noise_sigma must be >= 0")
        if not 0 <= self.ambiguous_share <= 1:
            raise DatasetError("ambiguous_share must be in [0, 1]")
        if not 0 <= self.ambiguous_positive_rate < 1:
            raise DatasetError("ambiguous_positive_rate must be in [0, 1)")
        if self.n_buckets < 2 or self.bucket_range <= 0:
            raise DatasetError("need n_buckets >= 2 and bucket_range > 0")
        if self.filler_tokens < 0 or (self.filler_tokens and self.filler_vocab < 1):
            raise DatasetError("filler_tokens must be >= 0 with a non-empty filler_vocab")

    def population_counts(self) -> dict[str, int]:
        n_pos = int(round(self.n_samples * self.positive_fraction))
        n_neg = self.n_samples - n_pos
        n_hard_total = int(round(n_neg * self.hard_negative_fraction))
        amb_neg = int(round(n_hard_total * self.ambiguous_share))
        hard = n_hard_total - amb_neg
        r = self.ambiguous_positive_rate
        amb_pos = min(n_pos, int(round(amb_neg * r / (1 - r))))
        return {
            "seen_positive": n_pos - amb_pos,
            "ambiguous_positive": amb_pos,
            "hard_negative": hard,
            "ambiguous_negative": amb_neg,
            "easy_negative": n_neg - n_hard_total,
        }


def _bucket_tokens(prefix: str, values: np.ndarray, spec: SyntheticSpec) -> list[str]:
    edges = np.linspace(-spec.bucket_range, spec.bucket_range, spec.n_buckets + 1)[1:-1]
    buckets = np.searchsorted(edges, values, side="right")
    return [f"{prefix}{i}b{b:02d}" for i, b in enumerate(buckets)]


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> Dataset:
    """Sample a corpus from ``spec``; a pure function of (spec, seed).

    Each coordinate is written as a token ``f<i>b<bucket>`` (shared) or
    ``m<i>b<bucket>`` (main-only), followed by filler words ``w<j>`` that
    carry no label signal.
    """
    rng = np.random.default_rng(seed)
    sep = spec.cluster_separation
    ds, dm = spec.dim_shared, spec.dim_main_only
    layout = {
        "seen_positive": (1, sep, sep / 2),
        "ambiguous_positive": (1, -sep, 0.0),
        "hard_negative": (0, sep, -sep / 2),
        "ambiguous_negative": (0, -sep, 0.0),
        "easy_negative": (0, 0.0, -sep / 2),
    }
    rows = []
    for pop, count in spec.population_counts().items():
        label, c_shared, c_main = layout[pop]
        for _ in range(count):
            xs = c_shared + spec.noise_sigma * rng.standard_normal(ds)
            xm = c_main + spec.noise_sigma * rng.standard_normal(dm)
            rows.append((label, xs, xm))
    order = rng.permutation(len(rows))
    samples = []
    for new_id, k in enumerate(order):
        label, xs, xm = rows[k]
        tokens = _bucket_tokens("f", xs, spec) + _bucket_tokens("m", xm, spec)
        if spec.filler_tokens:
            tokens += [f"w{j}" for j in rng.integers(0, spec.filler_vocab, spec.filler_tokens)]
        samples.append(Sample(new_id, " ".join(tokens), label))
    return Dataset(tuple(samples), f"synthetic-{seed}")


# main-only tokens of the synthetic corpus; the first stage must not see them
SYNTHETIC_MAIN_ONLY_PATTERN = r"m\d+b\d+"
