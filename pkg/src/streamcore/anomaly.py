"""Streaming anomaly detection: mass-profile forests and score filtering.

Scores are oriented so larger means more anomalous, in [0, 1] for the
forest. A ``QuantileFilter`` turns raw scores into boolean verdicts by
tracking a high quantile of the score stream with the P-squared
estimator (constant memory, no stored samples).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._kernels import backend as K
from .core import (
    AnomalyScorer,
    ContractError,
    EstimatorContract,
    Estimator,
    Instance,
    StreamSource,
    Transformer,
    check_instance,
    is_numeric,
)


class HalfSpaceTrees(AnomalyScorer):
    """Forest of random half-space trees over [0, 1]-scaled features.

    Structure is drawn once from the first learned instance's numeric
    features: each internal node picks a random feature and splits its
    work range (initially [0, 1] per feature) at the midpoint, to a fixed
    depth. Leaves hold mass counts from the previous window (reference)
    and the current one (latest); every ``window_size`` learned instances
    the latest masses become the reference. Scoring sums the reference
    mass of the leaf an instance falls into, per tree, normalized and
    inverted so sparse regions score near 1.
    """

    def __init__(self, n_trees: int = 25, depth: int = 15,
                 window_size: int = 250, seed: int = 0):
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if window_size < 1:
            raise ValueError("window_size must be >= 1")
        self.n_trees = n_trees
        self.depth = depth
        self.window_size = window_size
        self.seed = seed
        self._features: list[str] | None = None
        self._feats: np.ndarray | None = None
        self._thrs: np.ndarray | None = None
        self._reference: np.ndarray | None = None
        self._latest: np.ndarray | None = None
        self._learned = 0

    @property
    def node_count(self) -> int:
        return self.n_trees * ((1 << (self.depth + 1)) - 1)

    def _build(self, features: list[str]) -> None:
        if not features:
            raise ValueError("need at least one numeric feature")
        self._features = features
        d = len(features)
        rng = np.random.default_rng(self.seed)
        n_internal = (1 << self.depth) - 1
        n_leaves = 1 << self.depth
        feats = np.empty(self.n_trees * n_internal, dtype=np.intc)
        thrs = np.empty(self.n_trees * n_internal, dtype=np.float64)
        for t in range(self.n_trees):
            base = t * n_internal
            lo = np.zeros((1, d))
            hi = np.ones((1, d))
            pos = 0
            for level in range(self.depth):
                n_level = 1 << level
                chosen = rng.integers(0, d, size=n_level)
                rows = np.arange(n_level)
                mids = (lo[rows, chosen] + hi[rows, chosen]) / 2.0
                feats[base + pos:base + pos + n_level] = chosen
                thrs[base + pos:base + pos + n_level] = mids
                pos += n_level
                if level + 1 < self.depth:
                    next_lo = np.repeat(lo, 2, axis=0)
                    next_hi = np.repeat(hi, 2, axis=0)
                    next_hi[2 * rows, chosen] = mids
                    next_lo[2 * rows + 1, chosen] = mids
                    lo, hi = next_lo, next_hi
        self._feats = feats
        self._thrs = thrs
        self._reference = np.zeros(self.n_trees * n_leaves)
        self._latest = np.zeros(self.n_trees * n_leaves)

    def _vector(self, x: Instance) -> np.ndarray:
        get = x.get
        vals = [0.0] * len(self._features)
        for i, name in enumerate(self._features):
            value = get(name)
            if value is not None:
                if type(value) is float:
                    vals[i] = value
                elif is_numeric(value):
                    vals[i] = float(value)
        return np.asarray(vals)

    def score_one(self, x: Instance) -> float:
        check_instance(x)
        if self._feats is None:
            return 1.0
        mass = K.hst_mass(self._feats, self._thrs, self._reference,
                          self._vector(x), self.n_trees, self.depth)
        score = 1.0 - float(mass) / (self.n_trees * self.window_size)
        return min(1.0, max(0.0, score))

    def learn_one(self, x: Instance) -> None:
        check_instance(x)
        if self._feats is None:
            self._build([n for n, v in x.items() if is_numeric(v)])
        K.hst_learn(self._feats, self._thrs, self._latest,
                    self._vector(x), self.n_trees, self.depth)
        self._learned += 1
        if self._learned % self.window_size == 0:
            self._reference[:] = self._latest
            self._latest[:] = 0.0

    def leaf_mass_totals(self) -> tuple[float, float]:
        """(reference, latest) total masses across the forest (test aid)."""
        if self._reference is None:
            return (0.0, 0.0)
        return (float(self._reference.sum()), float(self._latest.sum()))

    def memory_estimate(self) -> int:
        if self._feats is None:
            return 128
        # per internal node: feature id + threshold; per leaf: two masses
        n_internal = self.n_trees * ((1 << self.depth) - 1)
        n_leaves = self.n_trees * (1 << self.depth)
        return 128 + 12 * n_internal + 16 * n_leaves


class P2Quantile:
    """P-squared single-quantile estimator (five markers, no samples kept)."""

    def __init__(self, q: float):
        if not 0.0 < q < 1.0:
            raise ValueError(f"quantile must lie in (0, 1): {q}")
        self.q = q
        self.n_seen = 0
        self._initial: list[float] = []
        self._heights: list[float] = []
        self._positions: list[float] = []
        self._increments = [0.0, q / 2.0, q, (1.0 + q) / 2.0, 1.0]

    def update(self, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"value is not finite: {value!r}")
        self.n_seen += 1
        if self.n_seen <= 5:
            self._initial.append(value)
            if self.n_seen == 5:
                self._heights = sorted(self._initial)
                self._positions = [1.0, 2.0, 3.0, 4.0, 5.0]
            return

        h, pos = self._heights, self._positions
        if value < h[0]:
            h[0] = value
            k = 0
        elif value >= h[4]:
            h[4] = value
            k = 3
        else:
            k = 0
            while k < 3 and value >= h[k + 1]:
                k += 1
        for i in range(k + 1, 5):
            pos[i] += 1.0

        n = float(self.n_seen)
        desired = [1.0 + (n - 1.0) * d for d in self._increments]
        for i in (1, 2, 3):
            delta = desired[i] - pos[i]
            if ((delta >= 1.0 and pos[i + 1] - pos[i] > 1.0)
                    or (delta <= -1.0 and pos[i - 1] - pos[i] < -1.0)):
                step = 1.0 if delta > 0.0 else -1.0
                candidate = self._parabolic(i, step)
                if h[i - 1] < candidate < h[i + 1]:
                    h[i] = candidate
                else:
                    h[i] = self._linear(i, step)
                pos[i] += step

    def _parabolic(self, i: int, d: float) -> float:
        h, pos = self._heights, self._positions
        return h[i] + d / (pos[i + 1] - pos[i - 1]) * (
            (pos[i] - pos[i - 1] + d) * (h[i + 1] - h[i]) / (pos[i + 1] - pos[i])
            + (pos[i + 1] - pos[i] - d) * (h[i] - h[i - 1]) / (pos[i] - pos[i - 1])
        )

    def _linear(self, i: int, d: float) -> float:
        h, pos = self._heights, self._positions
        j = i + int(d)
        return h[i] + d * (h[j] - h[i]) / (pos[j] - pos[i])

    def estimate(self) -> float:
        """Current quantile estimate; exact while fewer than 5 values seen."""
        if self.n_seen == 0:
            return 0.0
        if self.n_seen < 5:
            ordered = sorted(self._initial)
            return ordered[min(int(self.q * self.n_seen), self.n_seen - 1)]
        return self._heights[2]

    def memory_estimate(self) -> int:
        return 192


@dataclass(frozen=True)
class AnomalyVerdict:
    score: float
    is_anomaly: bool
    threshold: float


class QuantileFilter(Estimator):
    """Anomaly verdicts by comparing scores against a running quantile.

    The first ``warmup`` scores are forced normal while the threshold
    estimate settles. ``classify`` uses the estimate as of the scores
    already observed; the caller feeds the score back via ``update``
    afterwards (``learn_one`` does both around the wrapped detector).
    """

    contract = EstimatorContract(can_learn_one=True, can_score_one=True)

    def __init__(self, detector: AnomalyScorer | None = None, q: float = 0.99,
                 warmup: int = 100):
        if warmup < 0:
            raise ValueError("warmup must be non-negative")
        self.detector = detector
        self.warmup = warmup
        self._quantile = P2Quantile(q)

    @property
    def q(self) -> float:
        return self._quantile.q

    @property
    def n_seen(self) -> int:
        return self._quantile.n_seen

    def estimate(self) -> float:
        return self._quantile.estimate()

    def classify(self, score: float) -> AnomalyVerdict:
        threshold = self._quantile.estimate()
        is_anomaly = self._quantile.n_seen > self.warmup and score > threshold
        return AnomalyVerdict(score, is_anomaly, threshold)

    def update(self, score: float) -> None:
        self._quantile.update(score)

    def score_one(self, x: Instance) -> float:
        self._require_detector()
        return self.detector.score_one(x)

    def learn_one(self, x: Instance) -> None:
        self._require_detector()
        score = self.detector.score_one(x)
        self._quantile.update(score)
        self.detector.learn_one(x)

    def _require_detector(self) -> None:
        if self.detector is None:
            raise ContractError("no wrapped detector to delegate to")

    def memory_estimate(self) -> int:
        inner = self.detector.memory_estimate() if self.detector else 0
        return 64 + self._quantile.memory_estimate() + inner


@dataclass
class AnomalyPipeline:
    """Scaler + scorer + filter bundle evaluated in a fixed per-step order."""

    scaler: Transformer
    detector: AnomalyScorer
    filter: QuantileFilter


@dataclass(frozen=True)
class AnomalyRecord:
    step: int
    score: float
    threshold: float
    is_anomaly: bool
    truth: bool


def run_anomaly_pipeline(pipeline: AnomalyPipeline,
                         stream: StreamSource | Iterable,
                         ) -> tuple[list[AnomalyRecord], dict]:
    """Score-then-learn pass over a labeled stream of (x, is_anomaly_truth).

    Per instance, strictly: scale with current statistics, score, classify
    against the current threshold, feed the score to the filter, then let
    the scaler and the detector learn. Returns per-step records and a
    summary with precision/recall/F1 of verdicts against truth (zero
    denominators yield 0 by convention).
    """
    scaler, detector, filt = pipeline.scaler, pipeline.detector, pipeline.filter
    records: list[AnomalyRecord] = []
    tp = fp = fn = 0
    step = 0
    for x, truth in stream:
        step += 1
        scaled = scaler.transform_one(x)
        score = detector.score_one(scaled)
        verdict = filt.classify(score)
        filt.update(score)
        scaler.learn_one(x)
        detector.learn_one(scaler.transform_one(x))
        truth = bool(truth)
        records.append(AnomalyRecord(step, verdict.score, verdict.threshold,
                                     verdict.is_anomaly, truth))
        if verdict.is_anomaly and truth:
            tp += 1
        elif verdict.is_anomaly:
            fp += 1
        elif truth:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2.0 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    summary = {
        "n": step,
        "flagged": tp + fp,
        "anomalies": tp + fn,
        "true_positives": tp,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }
    return records, summary
