"""Real-valued genetic algorithm with tournament selection, blend crossover,
Gaussian mutation, clipping to bounds and elitism.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 20
    generations: int = 30
    crossover_prob: float = 0.7
    mutation_prob: float = 0.1
    mutation_sigma_fraction: float = 0.1
    tournament_k: int = 3
    elitism_count: int = 1
    seed: int = 0
    seeded_chromosomes: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "seeded_chromosomes",
                           tuple(tuple(float(g) for g in c) for c in self.seeded_chromosomes))
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be an even number >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.mutation_sigma_fraction <= 0:
            raise ValueError("mutation_sigma_fraction must be > 0")
        if not 2 <= self.tournament_k <= self.population_size:
            raise ValueError("tournament_k must be in [2, population_size]")
        if not 0 <= self.elitism_count <= self.population_size:
            raise ValueError("elitism_count must be in [0, population_size]")
        if len(self.seeded_chromosomes) > self.population_size:
            raise ValueError("more seeded chromosomes than population slots")


@dataclass
class GaResult:
    best: np.ndarray
    best_fitness: float
    history: list[float] = field(default_factory=list)   # best-so-far per generation
    mean_history: list[float] = field(default_factory=list)
    evaluations: int = 0

    def write_history_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["generation", "best_fitness", "mean_fitness"])
            for g, (b, m) in enumerate(zip(self.history, self.mean_history)):
                writer.writerow([g, repr(b), repr(m)])


def _safe_mean(values: np.ndarray) -> float:
    finite = values[np.isfinite(values)]
    return float(finite.mean()) if finite.size else -math.inf


def run_ga(fitness: Callable[[np.ndarray], float], bounds: Sequence[tuple[float, float]],
           cfg: GaConfig = GaConfig(), threads: int = 1) -> GaResult:
    """Maximize ``fitness`` over the box ``bounds``.

    Generation 0 holds the seeded chromosomes followed by uniform draws.
    Fitness values are cached by chromosome bytes, so elites carried over
    unchanged are never re-evaluated. All randomness comes from one
    generator consumed in a fixed order, so ``threads`` never changes the result.
    """
    lo = np.array([b[0] for b in bounds], dtype=np.float64)
    hi = np.array([b[1] for b in bounds], dtype=np.float64)
    if lo.size == 0:
        raise ValueError("bounds must be non-empty")
    if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("every bound needs finite lo <= hi")
    n_genes = lo.size
    for c in cfg.seeded_chromosomes:
        if len(c) != n_genes:
            raise ValueError(f"seeded chromosome {c} does not have {n_genes} genes")
        if np.any(np.array(c) < lo) or np.any(np.array(c) > hi):
            raise ValueError(f"seeded chromosome {c} lies outside the bounds")

    rng = np.random.default_rng(cfg.seed)
    pop_size = cfg.population_size
    seeded = np.array(cfg.seeded_chromosomes, dtype=np.float64).reshape(-1, n_genes)
    randoms = lo + rng.random((pop_size - len(seeded), n_genes)) * (hi - lo)
    pop = np.vstack([seeded, randoms])

    cache: dict[bytes, float] = {}
    pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def evaluate(population: np.ndarray) -> np.ndarray:
        todo = []
        for row in population:
            key = row.tobytes()
            if key not in cache and key not in todo:
                todo.append(key)
        chromosomes = [np.frombuffer(k, dtype=np.float64).copy() for k in todo]
        results = pool.map(fitness, chromosomes) if pool else map(fitness, chromosomes)
        for key, value in zip(todo, results):
            value = float(value)
            cache[key] = value if not math.isnan(value) else -math.inf
        return np.array([cache[row.tobytes()] for row in population])

    sigma = cfg.mutation_sigma_fraction * (hi - lo)
    try:
        fit = evaluate(pop)
        best_i = int(np.argmax(fit))
        best, best_fit = pop[best_i].copy(), float(fit[best_i])
        history, means = [best_fit], [_safe_mean(fit)]
        for gen in range(1, cfg.generations + 1):
            # tournament selection with replacement
            contenders = rng.integers(0, pop_size, size=(pop_size, cfg.tournament_k))
            winners = contenders[np.arange(pop_size), np.argmax(fit[contenders], axis=1)]
            parents = pop[winners]
            children = parents.copy()
            for j in range(0, pop_size, 2):
                if rng.random() < cfg.crossover_prob:
                    lam = rng.random()
                    a, b = parents[j], parents[j + 1]
                    children[j] = lam * a + (1 - lam) * b
                    children[j + 1] = lam * b + (1 - lam) * a
            mask = rng.random(children.shape) < cfg.mutation_prob
            noise = rng.standard_normal(children.shape) * sigma
            children = np.clip(np.where(mask, children + noise, children), lo, hi)

            if cfg.elitism_count:
                elite = np.argsort(-fit, kind="stable")[: cfg.elitism_count]
                children[: cfg.elitism_count] = pop[elite]
            pop = children
            fit = evaluate(pop)
            i = int(np.argmax(fit))
            if fit[i] > best_fit:
                best, best_fit = pop[i].copy(), float(fit[i])
            history.append(best_fit)
            means.append(_safe_mean(fit))
            log.debug("generation %d: best %.6f mean %.6f", gen, best_fit, means[-1])
    finally:
        if pool:
            pool.shutdown()
    return GaResult(best, best_fit, history, means, evaluations=len(cache))
