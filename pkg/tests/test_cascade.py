import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascadeforge.cascade import (
    CascadePipeline, DegenerateThresholdWarning, Stage, calibrate_threshold, gate_rate, infer,
    measure_pass_rate,
)
from cascadeforge.features import FeatureConfig, Vocabulary, vectorize_corpus
from cascadeforge.linear_model import LogisticModel

from conftest import make_dataset

LEVELS = 101
VOCAB = Vocabulary([f"s{i:03d}" for i in range(LEVELS)])


class TableScorer:
    """Score = value of the single token 's<NNN>' divided by 100; counts calls."""

    dim = LEVELS

    def __init__(self):
        self.calls = 0

    def score(self, v):
        self.calls += 1
        return float(v.indices[0]) / 100 if len(v) else 0.0

    def score_matrix(self, X):
        self.calls += X.shape[0]
        return np.asarray(X.argmax(axis=1)).ravel() / 100.0


def text(pre, main):
    # pre score from the first stage's token, main score from the second
    return f"s{round(pre * 100):03d} t{round(main * 100):03d}"


class MainTable(TableScorer):
    pass


def make_pipeline(th_pre, th_main=0.5):
    pre = Stage(TableScorer(), VOCAB)
    main_vocab = Vocabulary([f"t{i:03d}" for i in range(LEVELS)])
    main = Stage(MainTable(), main_vocab)
    return CascadePipeline(pre, main, th_pre, th_main)


def test_infer_examples():
    p = make_pipeline(0.4)
    r = infer(p, text(0.2, 0.9))
    assert not r.passed_pre and r.final_label == 0 and r.main_score is None and not r.main_called
    r = infer(p, text(0.6, 0.7))
    assert r.passed_pre and r.main_called and r.final_label == 1 and r.main_score == 0.7
    r = infer(p, text(0.6, 0.3))
    assert r.main_called and r.final_label == 0
    # equality is rejection at both gates
    assert not infer(p, text(0.4, 0.9)).passed_pre
    assert infer(p, text(0.6, 0.5)).final_label == 0


def test_main_never_called_when_gate_rejects():
    p = make_pipeline(0.5)
    for pre in np.linspace(0, 0.5, 11):
        infer(p, text(pre, 0.99))
    assert p.main.scorer.calls == 0
    infer(p, text(0.51, 0.99))
    assert p.main.scorer.calls == 1


def test_calibrate_quantile_example():
    scores = [round(0.1 * i, 1) for i in range(1, 11)]
    th = calibrate_threshold(scores, 0.3)
    assert th == 0.7
    assert sum(s > th for s in scores) == 3


def test_calibrate_pass_everything():
    scores = [0.3, 0.1, 0.2]
    th = calibrate_threshold(scores, 1.0)
    assert all(s > th for s in scores)


def test_calibrate_ties_are_reported():
    with pytest.warns(DegenerateThresholdWarning):
        th = calibrate_threshold([0.5] * 8, 0.25)
    assert gate_rate([0.5] * 8, th) in (0.0, 1.0)
    with pytest.raises(ValueError):
        calibrate_threshold([], 0.5)


@settings(max_examples=60, deadline=None)
@given(scores=st.lists(st.floats(0, 1), min_size=1, max_size=60, unique=True),
       rate=st.floats(0.01, 1.0))
def test_calibration_consistency_tie_free(scores, rate):
    with warnings.catch_warnings():
        warnings.simplefilter("error", DegenerateThresholdWarning)
        th = calibrate_threshold(scores, rate)
    measured = gate_rate(scores, th)
    assert measured >= rate - 1e-12
    assert abs(measured - rate) <= 1 / len(scores)


@settings(max_examples=40, deadline=None)
@given(scores=st.lists(st.floats(0, 1), min_size=1, max_size=40), a=st.floats(0, 1), b=st.floats(0, 1))
def test_gate_monotone(scores, a, b):
    lo, hi = min(a, b), max(a, b)
    assert gate_rate(scores, hi) <= gate_rate(scores, lo)


def test_measure_pass_rate_boundaries():
    d = make_dataset([(text(p, 0.5), 1) for p in (0.1, 0.4, 0.8, 0.9)])
    assert measure_pass_rate(make_pipeline(0.95), d) == 0.0
    assert measure_pass_rate(make_pipeline(0.05), d) == 1.0
    assert measure_pass_rate(make_pipeline(0.4), d) == 0.5
    with pytest.raises(ValueError):
        measure_pass_rate(make_pipeline(0.4), make_dataset([]))


def test_calibrate_then_measure_on_dataset():
    rng = np.random.default_rng(0)
    pres = rng.permutation(np.arange(1, 100))[:40] / 100
    d = make_dataset([(text(p, 0.5), 0) for p in pres])
    scores = make_pipeline(0.0).pre.score_texts(d.texts)
    th = calibrate_threshold(scores, 0.3)
    assert abs(measure_pass_rate(make_pipeline(th), d) - 0.3) <= 1 / len(d)


def test_stage_dimension_checked():
    with pytest.raises(ValueError):
        Stage(LogisticModel.zeros(3), Vocabulary(["a", "b"]))


def test_pipeline_directory_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    pre_vocab = Vocabulary(["a", "b", "a_b"])
    main_vocab = Vocabulary(["a", "b", "c", "b_c"])
    pre = Stage(LogisticModel(rng.normal(size=3), 0.1), pre_vocab, FeatureConfig(drop_pattern="c"))
    main = Stage(LogisticModel(rng.normal(size=4), -0.2), main_vocab, FeatureConfig(binary=True))
    for th in (0.37, -math.inf):
        p = CascadePipeline(pre, main, th)
        p.save(tmp_path / "pipe")
        back = CascadePipeline.load(tmp_path / "pipe")
        assert back.th_pre == th and back.th_main == 0.5
        assert back.pre.features == pre.features and back.main.features == main.features
        for t in ("a b c", "c c b", "b a"):
            assert infer(back, t) == infer(p, t)
    assert sorted(f.name for f in (tmp_path / "pipe").iterdir()) == [
        "main.model", "main.vocab", "pipeline.json", "pre.model", "pre.vocab"]
