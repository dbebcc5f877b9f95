"""Independent, sequential and feedback training of a two-stage cascade."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .cascade import MAIN_THRESHOLD, CascadePipeline, DegenerateThresholdWarning, Stage, calibrate_threshold
from .dataset import Dataset, subsample
from .evaluation import report_from_scores
from .features import FeatureConfig, build_vocabulary, vectorize_corpus
from .ga import GaConfig, GaResult, run_ga
from .linear_model import TrainConfig, train
from .weighting import WeightParams, compute_weights

log = logging.getLogger(__name__)

STRATEGIES = ("independent", "sequential", "feedback")
FEWSHOT_MODES = ("pre-only", "both")

# genes: log10(t_pos), log10(t_neg), w_neg_min, w_max. Temperatures are
# searched in log space so the flat (all-ones) curve is inside the box.
GENE_BOUNDS = ((-2.0, 6.0), (-2.0, 6.0), (0.0, 1.0), (1.0, 10.0))
UNIFORM_CHROMOSOME = (6.0, 6.0, 0.5, 1.0)


class StrategyError(RuntimeError):
    pass


def decode_chromosome(genes) -> WeightParams:
    g = [float(x) for x in genes]
    return WeightParams(t_pos=10.0 ** g[0], t_neg=10.0 ** g[1], w_neg_min=g[2], w_max=g[3])


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str = "independent"
    pre: TrainConfig = TrainConfig(class_balanced=True)
    main: TrainConfig = TrainConfig()
    target_pass_rate: float = 0.3
    ga: GaConfig | None = None
    k_pre: int = 2000
    k_main: int = 20000
    pre_features: FeatureConfig = FeatureConfig()
    main_features: FeatureConfig = FeatureConfig()
    th_main: float = MAIN_THRESHOLD
    fewshot_fraction: float = 1.0
    fewshot_mode: str = "pre-only"
    seed: int = 0
    # multiply balanced class weights into the feedback weights
    compose_class_weights: bool = True
    # 0 = score the training data with the main model fit on it (in-sample)
    cross_fit_folds: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not 0 < self.target_pass_rate <= 1:
            raise ValueError("target_pass_rate must be in (0, 1]")
        if self.strategy == "feedback" and self.ga is None:
            raise ValueError("the feedback strategy needs a ga config")
        if self.k_pre < 1 or self.k_main < 1:
            raise ValueError("feature budgets must be >= 1")
        if self.fewshot_mode not in FEWSHOT_MODES:
            raise ValueError(f"fewshot_mode must be one of {FEWSHOT_MODES}")
        if not 0 < self.fewshot_fraction <= 1:
            raise ValueError("fewshot_fraction must be in (0, 1]")
        if self.cross_fit_folds == 1 or self.cross_fit_folds < 0:
            raise ValueError("cross_fit_folds must be 0 or >= 2")


@dataclass
class TrainingResult:
    pipeline: CascadePipeline
    strategy: str
    weight_params: WeightParams | None = None
    ga: GaResult | None = None
    info: dict = field(default_factory=dict)


def _require_both_labels(d: Dataset, what: str) -> None:
    if len(d) == 0 or not d.has_both_labels():
        raise StrategyError(f"{what} needs both labels ({d.n_positive} positive of {len(d)})")


def _training_sets(train_ds: Dataset, cfg: StrategyConfig) -> tuple[Dataset, Dataset]:
    """(pre training set, main training set) after fewshot subsampling."""
    if cfg.fewshot_fraction == 1.0:
        return train_ds, train_ds
    sub = subsample(train_ds, cfg.fewshot_fraction, cfg.seed)
    return sub, (sub if cfg.fewshot_mode == "both" else train_ds)


def fit_stage(d: Dataset, k: int, features: FeatureConfig, config: TrainConfig,
              weights=None) -> Stage:
    vocab = build_vocabulary(d, k, features)
    X = vectorize_corpus(d.texts, vocab, features)
    return Stage(train(X, d.labels, weights, config), vocab, features)


def _calibrate(stage: Stage, val: Dataset, rate: float) -> float:
    return calibrate_threshold(stage.score_texts(val.texts), rate)


def train_independent(train_ds: Dataset, val: Dataset, cfg: StrategyConfig) -> TrainingResult:
    _require_both_labels(train_ds, "training set")
    _require_both_labels(val, "validation set")
    pre_ds, main_ds = _training_sets(train_ds, cfg)
    pre = fit_stage(pre_ds, cfg.k_pre, cfg.pre_features, cfg.pre)
    main = fit_stage(main_ds, cfg.k_main, cfg.main_features, cfg.main)
    th_pre = _calibrate(pre, val, cfg.target_pass_rate)
    return TrainingResult(CascadePipeline(pre, main, th_pre, cfg.th_main), "independent",
                          info={"pre_train_size": len(pre_ds), "main_train_size": len(main_ds)})


def train_sequential(train_ds: Dataset, val: Dataset, cfg: StrategyConfig) -> TrainingResult:
    """Pre first; main sees only the training samples that clear the pre gate."""
    _require_both_labels(train_ds, "training set")
    _require_both_labels(val, "validation set")
    pre_ds, main_ds = _training_sets(train_ds, cfg)
    pre = fit_stage(pre_ds, cfg.k_pre, cfg.pre_features, cfg.pre)
    th_pre = _calibrate(pre, val, cfg.target_pass_rate)
    survivors = np.flatnonzero(pre.score_texts(main_ds.texts) > th_pre)
    kept = main_ds.take(survivors, f"{main_ds.name}-survivors")
    if not kept.has_both_labels():
        raise StrategyError(
            f"only {len(kept)} training samples survive the pre gate "
            f"({kept.n_positive} positive); the main model needs both labels")
    main = fit_stage(kept, cfg.k_main, cfg.main_features, cfg.main)
    log.info("sequential: %d of %d training samples reach the main model", len(kept), len(main_ds))
    return TrainingResult(CascadePipeline(pre, main, th_pre, cfg.th_main), "sequential",
                          info={"pre_train_size": len(pre_ds), "main_train_size": len(kept)})


def _main_scores_for(pre_ds: Dataset, main_ds: Dataset, main: Stage, cfg: StrategyConfig) -> np.ndarray:
    if cfg.cross_fit_folds == 0:
        return main.score_texts(pre_ds.texts)
    # out-of-fold scoring: each pre sample is scored by a main model that never saw it
    rng = np.random.default_rng(cfg.seed)
    fold_of = {sid: f for sid, f in zip(pre_ds.ids, rng.permutation(len(pre_ds)) % cfg.cross_fit_folds)}
    scores = np.empty(len(pre_ds))
    for f in range(cfg.cross_fit_folds):
        held = {sid for sid, g in fold_of.items() if g == f}
        rest = main_ds.take([i for i, s in enumerate(main_ds.samples) if s.id not in held])
        _require_both_labels(rest, f"cross-fit fold {f}")
        stage = fit_stage(rest, cfg.k_main, cfg.main_features, cfg.main)
        rows = [i for i, sid in enumerate(pre_ds.ids) if fold_of[sid] == f]
        scores[rows] = stage.score_texts([pre_ds.samples[i].text for i in rows])
    return scores


class FeedbackObjective:
    """Validation F1 of the cascade whose pre stage is trained with given weight genes.

    Everything that does not depend on the genes (vocabularies, matrices,
    main scores) is computed once at construction.
    """

    def __init__(self, pre_ds: Dataset, main: Stage, main_train_scores: np.ndarray,
                 val: Dataset, cfg: StrategyConfig):
        self.cfg = cfg
        self.labels = pre_ds.labels
        self.main_train_scores = np.asarray(main_train_scores)
        self.vocab = build_vocabulary(pre_ds, cfg.k_pre, cfg.pre_features)
        self.X = vectorize_corpus(pre_ds.texts, self.vocab, cfg.pre_features)
        self.X_val = vectorize_corpus(val.texts, self.vocab, cfg.pre_features)
        self.val_labels = val.labels
        self.val_main_scores = main.score_texts(val.texts)
        self.pre_config = replace(cfg.pre, class_balanced=cfg.pre.class_balanced and cfg.compose_class_weights)

    def weights(self, genes) -> np.ndarray:
        return compute_weights(self.main_train_scores, self.labels, decode_chromosome(genes))

    def pre_stage(self, genes) -> Stage:
        model = train(self.X, self.labels, self.weights(genes), self.pre_config)
        return Stage(model, self.vocab, self.cfg.pre_features)

    def threshold(self, stage: Stage) -> float:
        return calibrate_threshold(stage.scorer.score_matrix(self.X_val), self.cfg.target_pass_rate)

    def __call__(self, genes) -> float:
        try:
            stage = self.pre_stage(genes)
            val_pre = stage.scorer.score_matrix(self.X_val)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateThresholdWarning)
                th = calibrate_threshold(val_pre, self.cfg.target_pass_rate)
            return report_from_scores(self.val_labels, val_pre, self.val_main_scores,
                                      th, self.cfg.th_main).f1_e2e
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            log.debug("fitness failed for %s: %s", list(genes), exc)
            return -math.inf


def train_feedback(train_ds: Dataset, val: Dataset, cfg: StrategyConfig,
                   threads: int = 1) -> TrainingResult:
    """Main first on its full training set, then a GA over the weighting curve
    for the pre stage, scored by validation end-to-end F1."""
    _require_both_labels(train_ds, "training set")
    _require_both_labels(val, "validation set")
    if cfg.ga is None:
        raise StrategyError("feedback training needs a ga config")
    pre_ds, main_ds = _training_sets(train_ds, cfg)
    main = fit_stage(main_ds, cfg.k_main, cfg.main_features, cfg.main)
    scores = _main_scores_for(pre_ds, main_ds, main, cfg)
    objective = FeedbackObjective(pre_ds, main, scores, val, cfg)

    seeds = cfg.ga.seeded_chromosomes
    if UNIFORM_CHROMOSOME not in seeds:
        seeds = (UNIFORM_CHROMOSOME,) + seeds
    ga_cfg = replace(cfg.ga, seeded_chromosomes=seeds[: cfg.ga.population_size])
    result = run_ga(objective, GENE_BOUNDS, ga_cfg, threads=threads)
    if not math.isfinite(result.best_fitness):
        raise StrategyError("no weighting candidate produced a usable pre model")
    params = decode_chromosome(result.best)
    pre = objective.pre_stage(result.best)
    th_pre = objective.threshold(pre)
    log.info("feedback: best validation F1_e2e %.4f with %s", result.best_fitness, params)
    return TrainingResult(CascadePipeline(pre, main, th_pre, cfg.th_main), "feedback", params, result,
                          info={"pre_train_size": len(pre_ds), "main_train_size": len(main_ds),
                                "ga_evaluations": result.evaluations})


def train_strategy(train_ds: Dataset, val: Dataset, cfg: StrategyConfig, threads: int = 1) -> TrainingResult:
    if cfg.strategy == "independent":
        return train_independent(train_ds, val, cfg)
    if cfg.strategy == "sequential":
        return train_sequential(train_ds, val, cfg)
    return train_feedback(train_ds, val, cfg, threads=threads)
