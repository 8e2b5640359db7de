"""Precision, recall and per-stage timing."""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

PIPELINE_STAGES = ("extract", "describe", "match", "gms", "ransac")


def precision(labels) -> float:
    """100 * correct / retained; 0.0 for an empty retained set (see ``is_empty``)."""
    labels = np.asarray(labels, dtype=bool)
    if labels.size == 0:
        return 0.0
    return 100.0 * int(labels.sum()) / labels.size


def recall(retained_correct: int, missed_true: int) -> float:
    denom = retained_correct + missed_true
    if denom == 0:
        return 0.0
    return 100.0 * retained_correct / denom


@dataclass
class EvalResult:
    precision: float
    recall: float
    num_correct: int
    num_false: int
    num_missed: int
    precision_empty: bool = False
    recall_empty: bool = False
    elapsed: dict = field(default_factory=dict)

    @property
    def false_rate(self) -> float:
        denom = self.num_correct + self.num_false
        return 100.0 * self.num_false / denom if denom else 0.0


def evaluate(retained, truth) -> EvalResult:
    """Score a retained-match mask against ground-truth labels over the same candidates."""
    retained = np.asarray(retained, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if retained.shape != truth.shape:
        raise ValueError("retained mask and labels differ in shape")
    correct = int((retained & truth).sum())
    false = int((retained & ~truth).sum())
    missed = int((~retained & truth).sum())
    return EvalResult(
        precision=precision(truth[retained]),
        recall=recall(correct, missed),
        num_correct=correct,
        num_false=false,
        num_missed=missed,
        precision_empty=correct + false == 0,
        recall_empty=correct + missed == 0,
    )


class Stopwatch:
    """Wall time per named stage, in milliseconds.

    Only the pipeline stages count towards ``total``; anything else timed
    here (image loading, metric computation) is recorded but excluded.
    """

    def __init__(self, clock=time.perf_counter):
        self._clock = clock
        self.stages: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = self._clock()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + (self._clock() - t0) * 1e3

    def __getitem__(self, name: str) -> float:
        return self.stages.get(name, 0.0)

    @property
    def total(self) -> float:
        return sum(self[s] for s in PIPELINE_STAGES)

    def as_dict(self) -> dict:
        out = {s: self[s] for s in PIPELINE_STAGES}
        out["total"] = self.total
        return out
