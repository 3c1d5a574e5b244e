"""Prequential (test-then-train) evaluation with streaming metrics.

Every instance is predicted first and learned second, so metrics always
reflect out-of-sample behavior; a fresh model's cold-start guesses count
as errors from step one. Metrics are computed from confusion counts and
can be recomputed exactly from the logged pairs.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .core import ClassLabel, StreamSource
from .fairness import CumulativeFairnessTracker, SensitiveSpec

KNOWN_METRICS = ("accuracy", "cohen_kappa", "f1")


class ConfusionCounts:
    """Sparse confusion matrix with add/remove support for rolling windows."""

    def __init__(self):
        self._counts: dict[tuple[ClassLabel, ClassLabel], int] = {}
        self._labels: dict[ClassLabel, None] = {}
        self.total = 0

    def add(self, y_true: ClassLabel, y_pred: ClassLabel) -> None:
        self._labels.setdefault(y_true, None)
        self._labels.setdefault(y_pred, None)
        key = (y_true, y_pred)
        self._counts[key] = self._counts.get(key, 0) + 1
        self.total += 1

    def remove(self, y_true: ClassLabel, y_pred: ClassLabel) -> None:
        key = (y_true, y_pred)
        current = self._counts.get(key, 0)
        if current <= 0:
            raise ValueError(f"no observation to remove for {key!r}")
        if current == 1:
            del self._counts[key]
        else:
            self._counts[key] = current - 1
        self.total -= 1

    def count(self, y_true: ClassLabel, y_pred: ClassLabel) -> int:
        return self._counts.get((y_true, y_pred), 0)

    @property
    def labels(self) -> list[ClassLabel]:
        return list(self._labels)

    def true_total(self, label: ClassLabel) -> int:
        return sum(c for (t, _), c in self._counts.items() if t == label)

    def pred_total(self, label: ClassLabel) -> int:
        return sum(c for (_, p), c in self._counts.items() if p == label)

    def as_dict(self) -> dict:
        return {str(t): {str(p): c for (t2, p), c in sorted(
            self._counts.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1]))
        ) if t2 == t} for t in sorted({t for t, _ in self._counts}, key=str)}


def accuracy(cc: ConfusionCounts) -> float:
    """Fraction of agreeing pairs; 0.0 before any observation."""
    if cc.total == 0:
        return 0.0
    agree = sum(c for (t, p), c in cc._counts.items() if t == p)
    return agree / cc.total


def cohen_kappa(cc: ConfusionCounts) -> float:
    """Agreement beyond chance from the marginals; 0.0 when chance is total."""
    n = cc.total
    if n == 0:
        return 0.0
    p_observed = accuracy(cc)
    p_expected = sum(
        cc.true_total(label) * cc.pred_total(label) for label in cc.labels
    ) / (n * n)
    if p_expected >= 1.0:
        return 0.0
    return (p_observed - p_expected) / (1.0 - p_expected)


def f1_binary(cc: ConfusionCounts, positive: ClassLabel) -> float:
    """Harmonic precision/recall mean; zero denominators yield 0."""
    tp = cc.count(positive, positive)
    fp = cc.pred_total(positive) - tp
    fn = cc.true_total(positive) - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


class RollingWindow:
    """Confusion counts over the last ``window`` (truth, prediction) pairs."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._pairs: deque[tuple[ClassLabel, ClassLabel]] = deque()
        self.counts = ConfusionCounts()

    def add(self, y_true: ClassLabel, y_pred: ClassLabel) -> None:
        if len(self._pairs) >= self.window:
            old_true, old_pred = self._pairs.popleft()
            self.counts.remove(old_true, old_pred)
        self._pairs.append((y_true, y_pred))
        self.counts.add(y_true, y_pred)

    def __len__(self) -> int:
        return len(self._pairs)


class ResourceTracker:
    """Cumulative wall-clock timings plus structural memory readings."""

    def __init__(self):
        self.learn_time_ns = 0
        self.predict_time_ns = 0

    def timed_predict(self, model, x):
        start = time.perf_counter_ns()
        result = model.predict_one(x)
        self.predict_time_ns += time.perf_counter_ns() - start
        return result

    def timed_learn(self, model, x, y) -> None:
        start = time.perf_counter_ns()
        model.learn_one(x, y)
        self.learn_time_ns += time.perf_counter_ns() - start

    @staticmethod
    def memory_bytes(model) -> int:
        estimate = getattr(model, "memory_estimate", None)
        return int(estimate()) if callable(estimate) else 0


@dataclass(frozen=True)
class PrequentialConfig:
    metrics: tuple[str, ...] = ("accuracy", "cohen_kappa")
    stride: int = 100
    rolling_window: int | None = None
    positive_label: ClassLabel | None = None
    seed: int = 0

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        unknown = [m for m in self.metrics if m not in KNOWN_METRICS]
        if unknown:
            raise ValueError(f"unknown metrics: {unknown}")
        if "f1" in self.metrics and self.positive_label is None:
            raise ValueError("f1 requires positive_label")
        if self.rolling_window is not None and self.rolling_window < 1:
            raise ValueError("rolling_window must be >= 1")


class RunAborted(RuntimeError):
    """A model or stream failure mid-run; partial records are preserved."""

    def __init__(self, records: list[dict], summary: dict):
        super().__init__(f"run aborted after {summary.get('n', 0)} steps")
        self.records = records
        self.summary = summary


def prequential_run(model, stream: StreamSource | Iterable,
                    config: PrequentialConfig = PrequentialConfig(),
                    fairness: SensitiveSpec | None = None,
                    ) -> tuple[list[dict], dict]:
    """Test-then-train pass; returns (stride records, final summary).

    With a ``fairness`` spec, cumulative statistical parity and equal
    opportunity of the model's predictions are tracked and recorded.
    Failures raise :class:`RunAborted` carrying the partial records.
    """
    counts = ConfusionCounts()
    rolling = (RollingWindow(config.rolling_window)
               if config.rolling_window else None)
    tracker = CumulativeFairnessTracker(fairness) if fairness else None
    resources = ResourceTracker()
    records: list[dict] = []
    step = 0

    def metric_values() -> dict:
        values: dict = {}
        for name in config.metrics:
            if name == "accuracy":
                values["accuracy"] = accuracy(counts)
            elif name == "cohen_kappa":
                values["cohen_kappa"] = cohen_kappa(counts)
            elif name == "f1":
                values["f1"] = f1_binary(counts, config.positive_label)
        if rolling is not None:
            values["rolling_accuracy"] = accuracy(rolling.counts)
        if tracker is not None:
            values["statistical_parity"] = tracker.statistical_parity()
            values["equal_opportunity"] = tracker.equal_opportunity()
        return values

    def snapshot() -> dict:
        record = {"step": step}
        record.update(metric_values())
        record["learn_time_ns"] = resources.learn_time_ns
        record["predict_time_ns"] = resources.predict_time_ns
        record["memory_bytes"] = resources.memory_bytes(model)
        return record

    try:
        for x, y in stream:
            step += 1
            y_pred = resources.timed_predict(model, x)
            counts.add(y, y_pred)
            if rolling is not None:
                rolling.add(y, y_pred)
            if tracker is not None:
                group = fairness.group_of(x)
                if group in (fairness.deprived, fairness.favored):
                    tracker.update(group, y_pred, y)
            resources.timed_learn(model, x, y)
            if step % config.stride == 0:
                records.append(snapshot())
    except Exception:
        raise RunAborted(records, _summary(step, stream, metric_values(),
                                           counts, resources, model))
    if step % config.stride != 0:
        records.append(snapshot())
    return records, _summary(step, stream, metric_values(), counts,
                             resources, model)


def _summary(step, stream, metrics, counts, resources, model) -> dict:
    summary = {"n": step}
    summary.update(metrics)
    summary["confusion"] = counts.as_dict()
    summary["memory_bytes"] = resources.memory_bytes(model)
    summary["learn_time_ns"] = resources.learn_time_ns
    summary["predict_time_ns"] = resources.predict_time_ns
    if isinstance(stream, StreamSource):
        summary["consumed"] = stream.consumed
    return summary
