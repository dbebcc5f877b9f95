"""Sample-weighted logistic regression trained by seeded mini-batch gradient descent."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numba
import numpy as np
import scipy.sparse as sp

from .features import FeatureVector

EPS = 1e-12
_MAGIC = b"CFLOGREG"
_VERSION = 1


class TrainingError(RuntimeError):
    pass


@runtime_checkable
class Scorer(Protocol):
    """Anything that maps a feature matrix to scores in [0, 1]."""

    dim: int

    def score(self, v: FeatureVector) -> float: ...

    def score_matrix(self, X) -> np.ndarray: ...


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = float(self.bias)

    @classmethod
    def zeros(cls, dim: int) -> "LogisticModel":
        return cls(np.zeros(dim), 0.0)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def score(self, v: FeatureVector) -> float:
        return predict_score(self, v)

    def score_matrix(self, X) -> np.ndarray:
        return sigmoid(_decision(self, X))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IQd", _VERSION, self.dim, self.bias))
            fh.write(self.weights.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "LogisticModel":
        with open(path, "rb") as fh:
            blob = fh.read()
        if not blob.startswith(_MAGIC):
            raise ValueError(f"{path}: not a logistic model file")
        off = len(_MAGIC)
        version, dim, bias = struct.unpack_from("<IQd", blob, off)
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported model format version {version}")
        off += struct.calcsize("<IQd")
        weights = np.frombuffer(blob, dtype="<f8", count=dim, offset=off).astype(np.float64)
        if off + 8 * dim != len(blob):
            raise ValueError(f"{path}: truncated or oversized model file")
        return cls(weights, bias)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    l2: float = 1e-4
    batch_size: int = 64
    class_balanced: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def balanced_class_weights(labels) -> tuple[float, float]:
    """(weight_pos, weight_neg) with weight_c = n / (2 * n_c)."""
    labels = np.asarray(labels)
    n = len(labels)
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("balanced class weights need both labels")
    return n / (2 * n_pos), n / (2 * n_neg)


def _decision(model: LogisticModel, X) -> np.ndarray:
    return np.asarray(X @ model.weights).ravel() + model.bias


def _check(X, y, weights):
    n = X.shape[0]
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if len(y) != n or len(w) != n:
        raise ValueError(f"length mismatch: {n} rows, {len(y)} labels, {len(w)} weights")
    return y, w


def loss(model: LogisticModel, X, y, weights, l2: float = 0.0) -> float:
    """Mean weighted cross-entropy, (1/n) * sum w_i * CE_i, plus (l2/2)*||w||^2."""
    y, w = _check(X, y, weights)
    n = len(y)
    p = np.clip(sigmoid(_decision(model, X)), EPS, 1 - EPS)
    ce = -(y * np.log(p) + (1 - y) * np.log(1 - p))
    value = float(w @ ce) / n if n else 0.0
    if l2 > 0:
        value += 0.5 * l2 * float(model.weights @ model.weights)
    return value


def gradient(model: LogisticModel, X, y, weights, l2: float = 0.0) -> tuple[np.ndarray, float]:
    y, w = _check(X, y, weights)
    n = len(y)
    r = w * (sigmoid(_decision(model, X)) - y) / n
    gw = np.asarray(X.T @ r).ravel()
    if l2 > 0:
        gw = gw + l2 * model.weights
    return gw, float(r.sum())


def predict_score(model: LogisticModel, v: FeatureVector) -> float:
    if len(v) and (v.indices[-1] >= model.dim or v.indices[0] < 0):
        raise IndexError(f"feature index {int(v.indices[-1])} out of range for dimension {model.dim}")
    z = float(model.weights[v.indices] @ v.values) + model.bias
    return float(sigmoid(np.array([z]))[0])


def train(X, y, weights=None, config: TrainConfig = TrainConfig(),
          history: list[float] | None = None) -> LogisticModel:
    """Fit from zero initialization.

    Each epoch shuffles the rows with a generator seeded by ``config.seed``
    and takes one step per mini-batch on that batch's mean weighted loss.
    If ``history`` is given, the full-data loss after each epoch is appended.
    """
    X = sp.csr_matrix(X) if not sp.issparse(X) else X.tocsr()
    n, dim = X.shape
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if len(y) != n or len(w) != n:
        raise ValueError(f"length mismatch: {n} rows, {len(y)} labels, {len(w)} weights")
    if n < 2 or y.min() == y.max():
        raise ValueError("training needs at least two samples covering both labels")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("sample weights must be finite and >= 0")
    if config.class_balanced:
        w_pos, w_neg = balanced_class_weights(y)
        w = w * np.where(y == 1, w_pos, w_neg)

    rng = np.random.default_rng(config.seed)
    coef = np.zeros(dim)
    bias = np.zeros(1)
    indptr = X.indptr.astype(np.int64)
    indices = X.indices.astype(np.int64)
    data = X.data.astype(np.float64)
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        _sgd_epoch(indptr, indices, data, y, w, perm, coef, bias,
                   config.learning_rate, config.l2, config.batch_size)
        if history is not None or epoch == config.epochs:
            value = loss(LogisticModel(coef, bias[0]), X, y, w, config.l2)
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            if history is not None:
                history.append(value)
        if not (np.isfinite(bias[0]) and np.all(np.isfinite(coef))):
            raise TrainingError(f"non-finite parameters at epoch {epoch}")
    return LogisticModel(coef, bias[0])


@numba.njit(cache=True)
def _sgd_epoch(indptr, indices, data, y, w, perm, coef, bias, lr, l2, batch_size):
    n = perm.shape[0]
    z = np.empty(batch_size)
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        m = stop - start
        # residuals for the whole batch before any parameter moves
        for b in range(m):
            i = perm[start + b]
            acc = bias[0]
            for k in range(indptr[i], indptr[i + 1]):
                acc += coef[indices[k]] * data[k]
            if acc >= 0:
                p = 1.0 / (1.0 + np.exp(-acc))
            else:
                e = np.exp(acc)
                p = e / (1.0 + e)
            z[b] = w[i] * (p - y[i]) / m
        if l2 > 0:
            for j in range(coef.shape[0]):
                coef[j] -= lr * l2 * coef[j]
        gb = 0.0
        for b in range(m):
            i = perm[start + b]
            r = z[b]
            gb += r
            for k in range(indptr[i], indptr[i + 1]):
                coef[indices[k]] -= lr * r * data[k]
        bias[0] -= lr * gb
