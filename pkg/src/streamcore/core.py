"""Streaming data model: dict instances, one-at-a-time estimators, pipelines.

An instance is a plain ``dict`` mapping feature names to numeric or
categorical (string) values; dicts preserve insertion order, which fixes the
feature order everywhere downstream. Estimators consume one instance at a
time and must answer predictions at any point, including before the first
``learn_one`` call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Iterator

Instance = dict[str, Any]
ClassLabel = Hashable

#: Label returned by classifiers that have not observed a single class yet.
UNKNOWN_CLASS = "<unknown>"


class ContractError(TypeError):
    """An estimator was asked for an operation it does not declare."""


def is_numeric(value: Any) -> bool:
    """Numeric features are ints/floats (bools count as 0/1)."""
    # exact-type test first: floats dominate hot paths
    return type(value) is float or isinstance(value, (int, float))


def check_instance(x: Instance) -> None:
    """Reject non-dict inputs and non-finite numeric feature values."""
    if not isinstance(x, dict):
        raise ValueError(f"instance must be a dict, got {type(x).__name__}")
    isfinite = math.isfinite
    for name, value in x.items():
        if type(value) is float:
            if isfinite(value):
                continue
            raise ValueError(f"feature {name!r} is not finite: {value!r}")
        if isinstance(value, str):
            continue
        if isinstance(value, (int, float)):
            if not isfinite(value):
                raise ValueError(f"feature {name!r} is not finite: {value!r}")
        else:
            raise ValueError(
                f"feature {name!r} has unsupported type {type(value).__name__}"
            )


def check_distribution(dist: dict[ClassLabel, float], tol: float = 1e-9) -> None:
    """Class distributions carry non-negative probabilities summing to 1."""
    total = 0.0
    for label, p in dist.items():
        if p < 0.0:
            raise ValueError(f"negative probability for {label!r}: {p}")
        total += p
    if abs(total - 1.0) > tol:
        raise ValueError(f"probabilities sum to {total}, not 1")


@dataclass(frozen=True)
class EstimatorContract:
    """Capability flags a concrete estimator declares."""

    can_learn_one: bool = False
    can_predict_one: bool = False
    can_predict_proba_one: bool = False
    can_score_one: bool = False
    can_transform_one: bool = False


class Estimator:
    contract = EstimatorContract()

    def memory_estimate(self) -> int:
        """Structural memory estimate in bytes (counts times unit sizes)."""
        return 0


class Classifier(Estimator):
    """Supervised learner: ``learn_one(x, y)`` plus label/distribution queries."""

    contract = EstimatorContract(
        can_learn_one=True, can_predict_one=True, can_predict_proba_one=True
    )

    def learn_one(self, x: Instance, y: ClassLabel, w: float = 1.0) -> None:
        raise NotImplementedError

    def predict_proba_one(self, x: Instance) -> dict[ClassLabel, float]:
        raise NotImplementedError

    def predict_one(self, x: Instance) -> ClassLabel:
        dist = self.predict_proba_one(x)
        return max(dist.items(), key=lambda kv: kv[1])[0]


class Transformer(Estimator):
    """Stateful feature map: ``learn_one(x)`` then ``transform_one(x)``."""

    contract = EstimatorContract(can_learn_one=True, can_transform_one=True)

    def learn_one(self, x: Instance) -> None:
        raise NotImplementedError

    def transform_one(self, x: Instance) -> Instance:
        raise NotImplementedError


class AnomalyScorer(Estimator):
    """Unsupervised scorer: larger ``score_one`` means more anomalous."""

    contract = EstimatorContract(can_learn_one=True, can_score_one=True)

    def learn_one(self, x: Instance) -> None:
        raise NotImplementedError

    def score_one(self, x: Instance) -> float:
        raise NotImplementedError


def cold_start_distribution(classes: Iterable[ClassLabel]) -> dict[ClassLabel, float]:
    """Uniform over observed classes; the unknown-class singleton before that."""
    classes = list(classes)
    if not classes:
        return {UNKNOWN_CLASS: 1.0}
    p = 1.0 / len(classes)
    return {c: p for c in classes}


class StreamSource:
    """Single-pass iterator over stream items with a consumed-count audit.

    Once exhausted it stays exhausted; a second ``for`` loop yields nothing.
    """

    def __init__(self, items: Iterable[Any]):
        self._it: Iterator[Any] = iter(items)
        self.consumed = 0

    def __iter__(self) -> "StreamSource":
        return self

    def __next__(self) -> Any:
        item = next(self._it)
        self.consumed += 1
        return item

    def take(self, n: int) -> list[Any]:
        out = []
        for item in self:
            out.append(item)
            if len(out) >= n:
                break
        return out


def stream_from_iterator(items: Iterable[Any]) -> StreamSource:
    return StreamSource(items)


class Pipeline(Estimator):
    """Chain of transformers ending in a terminal estimator.

    ``learn_one`` lets every transformer update its statistics from the
    instance *before* transforming it, then feeds the result onward; query
    paths (predict/score) transform without mutating any stage.
    """

    def __init__(self, *stages: Estimator):
        if not stages:
            raise ContractError("pipeline needs at least one stage")
        for stage in stages[:-1]:
            if not stage.contract.can_transform_one:
                raise ContractError(
                    f"intermediate stage {type(stage).__name__} cannot transform"
                )
        terminal = stages[-1]
        c = terminal.contract
        if not (c.can_predict_one or c.can_predict_proba_one or c.can_score_one
                or c.can_transform_one):
            raise ContractError(
                f"terminal stage {type(terminal).__name__} supports no queries"
            )
        self.stages = list(stages)
        self.terminal = terminal
        self.contract = EstimatorContract(
            can_learn_one=True,
            can_predict_one=c.can_predict_one,
            can_predict_proba_one=c.can_predict_proba_one,
            can_score_one=c.can_score_one,
            can_transform_one=c.can_transform_one,
        )

    def _transform(self, x: Instance) -> Instance:
        for stage in self.stages[:-1]:
            x = stage.transform_one(x)
        return x

    def learn_one(self, x: Instance, y: ClassLabel | None = None) -> None:
        for stage in self.stages[:-1]:
            stage.learn_one(x)
            x = stage.transform_one(x)
        if not self.terminal.contract.can_learn_one:
            raise ContractError(
                f"terminal stage {type(self.terminal).__name__} cannot learn"
            )
        if y is None:
            self.terminal.learn_one(x)
        else:
            self.terminal.learn_one(x, y)

    def predict_one(self, x: Instance) -> ClassLabel:
        self._require("can_predict_one")
        return self.terminal.predict_one(self._transform(x))

    def predict_proba_one(self, x: Instance) -> dict[ClassLabel, float]:
        self._require("can_predict_proba_one")
        return self.terminal.predict_proba_one(self._transform(x))

    def score_one(self, x: Instance) -> float:
        self._require("can_score_one")
        return self.terminal.score_one(self._transform(x))

    def transform_one(self, x: Instance) -> Instance:
        self._require("can_transform_one")
        return self.terminal.transform_one(self._transform(x))

    def _require(self, flag: str) -> None:
        if not getattr(self.terminal.contract, flag):
            raise ContractError(
                f"terminal stage {type(self.terminal).__name__} lacks {flag}"
            )

    def memory_estimate(self) -> int:
        return sum(stage.memory_estimate() for stage in self.stages)
