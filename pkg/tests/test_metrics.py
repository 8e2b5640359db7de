import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmsransac.metrics import PIPELINE_STAGES, Stopwatch, evaluate, precision, recall


def test_precision_examples():
    assert precision([True] * 8 + [False] * 2) == 80.0
    assert precision([True] * 5) == 100.0
    assert precision([]) == 0.0


def test_recall_examples():
    assert recall(8, 8) == 50.0
    assert recall(8, 0) == 100.0
    assert recall(0, 0) == 0.0


def test_evaluate_counts_and_empty_markers():
    retained = np.array([1, 1, 1, 0, 0, 1], bool)
    truth = np.array([1, 0, 1, 1, 0, 1], bool)
    ev = evaluate(retained, truth)
    assert (ev.num_correct, ev.num_false, ev.num_missed) == (3, 1, 1)
    assert ev.precision == 75.0 and ev.recall == 75.0
    empty = evaluate(np.zeros(3, bool), np.zeros(3, bool))
    assert empty.precision == 0.0 and empty.precision_empty and empty.recall_empty
    with pytest.raises(ValueError):
        evaluate(np.zeros(3, bool), np.zeros(4, bool))


@given(st.lists(st.tuples(st.booleans(), st.booleans()), max_size=80))
def test_complement_and_recall_bounds(pairs):
    retained = np.array([r for r, _ in pairs], bool)
    truth = np.array([t for _, t in pairs], bool)
    ev = evaluate(retained, truth)
    if ev.num_correct + ev.num_false:
        assert ev.precision + ev.false_rate == pytest.approx(100.0)
    assert 0.0 <= ev.recall <= 100.0
    if not ev.recall_empty:
        assert (ev.recall == 100.0) == (ev.num_missed == 0)


def fake_clock(step):
    counter = itertools.count()
    return lambda: next(counter) * step


def test_stopwatch_no_op_stages():
    sw = Stopwatch()
    for s in PIPELINE_STAGES:
        with sw.stage(s):
            pass
    assert sw.total < 1.0


def test_stopwatch_additive_and_excludes_io():
    sw = Stopwatch(clock=fake_clock(0.001))  # every clock read advances 1 ms
    with sw.stage("load"):
        pass
    for s in PIPELINE_STAGES:
        with sw.stage(s):
            pass
    with sw.stage("metrics"):
        pass
    d = sw.as_dict()
    assert d["total"] == pytest.approx(sum(d[s] for s in PIPELINE_STAGES))
    assert d["total"] == pytest.approx(5.0)
    assert sw["load"] == pytest.approx(1.0) and "load" not in d


def test_stopwatch_accumulates_and_survives_exceptions():
    sw = Stopwatch(clock=fake_clock(0.002))
    with sw.stage("gms"):
        pass
    with pytest.raises(RuntimeError):
        with sw.stage("gms"):
            raise RuntimeError
    assert sw["gms"] == pytest.approx(4.0)
