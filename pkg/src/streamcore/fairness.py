"""Group-fairness instrumentation and bias interventions for streams.

Conventions: the sensitive attribute is an ordinary feature; a
``SensitiveSpec`` names the feature, its deprived and favored values and
the positive class. Parity-style differences are signed, favored minus
deprived, and fall back to 0 when a group has no observations yet.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ClassLabel, Instance, is_numeric
from .drift import Adwin, DriftState

#: Default chunk length for chunk-based interventions.
DEFAULT_CHUNK_SIZE = 500


@dataclass(frozen=True)
class SensitiveSpec:
    """Which feature is protected, who is deprived, and what counts as positive."""

    feature: str
    deprived: ClassLabel
    favored: ClassLabel
    positive: ClassLabel

    def __post_init__(self):
        if self.deprived == self.favored:
            raise ValueError("deprived and favored values must differ")

    def group_of(self, x: Instance):
        return x.get(self.feature)


class CumulativeFairnessTracker:
    """Streaming parity metrics over a classifier's predictions.

    Update with (group, predicted label, true label) per instance;
    queries are O(1) over cumulative counts.
    """

    def __init__(self, spec: SensitiveSpec, epsilon: float = 0.1):
        if epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        self.spec = spec
        self.epsilon = epsilon
        self.n_seen = 0
        self._n_pred = {spec.deprived: 0, spec.favored: 0}
        self._n_pos_pred = {spec.deprived: 0, spec.favored: 0}
        self._n_actual_pos = {spec.deprived: 0, spec.favored: 0}
        self._n_true_pos = {spec.deprived: 0, spec.favored: 0}

    def update(self, group, y_pred, y_true) -> None:
        if group not in self._n_pred:
            raise ValueError(f"unknown sensitive group {group!r}")
        self.n_seen += 1
        self._n_pred[group] += 1
        if y_pred == self.spec.positive:
            self._n_pos_pred[group] += 1
        if y_true == self.spec.positive:
            self._n_actual_pos[group] += 1
            if y_pred == self.spec.positive:
                self._n_true_pos[group] += 1

    def statistical_parity(self) -> float:
        """P(pred positive | favored) - P(pred positive | deprived)."""
        dep, fav = self.spec.deprived, self.spec.favored
        if self._n_pred[dep] == 0 or self._n_pred[fav] == 0:
            return 0.0
        return (self._n_pos_pred[fav] / self._n_pred[fav]
                - self._n_pos_pred[dep] / self._n_pred[dep])

    def equal_opportunity(self) -> float:
        """True-positive-rate difference, favored minus deprived."""
        dep, fav = self.spec.deprived, self.spec.favored
        if self._n_actual_pos[dep] == 0 or self._n_actual_pos[fav] == 0:
            return 0.0
        return (self._n_true_pos[fav] / self._n_actual_pos[fav]
                - self._n_true_pos[dep] / self._n_actual_pos[dep])

    def exceeds_threshold(self) -> bool:
        return max(abs(self.statistical_parity()),
                   abs(self.equal_opportunity())) > self.epsilon

    def memory_estimate(self) -> int:
        return 192


class JointFrequencyTable:
    """Running joint counts over (sensitive group, class label)."""

    def __init__(self):
        self.total = 0
        self._group: Counter = Counter()
        self._label: Counter = Counter()
        self._joint: Counter = Counter()

    def update(self, group, label) -> None:
        self.total += 1
        self._group[group] += 1
        self._label[label] += 1
        self._joint[(group, label)] += 1

    def weight(self, group, label, floor: float = 1e-6) -> float:
        """Expected-over-observed frequency ratio; 1.0 for unseen cells."""
        if self.total == 0 or (group, label) not in self._joint:
            return 1.0
        p_group = self._group[group] / self.total
        p_label = self._label[label] / self.total
        p_joint = self._joint[(group, label)] / self.total
        return p_group * p_label / max(p_joint, floor)

    def memory_estimate(self) -> int:
        return 96 + 48 * (len(self._group) + len(self._label) + len(self._joint))


def reweight_instance(x: Instance, y: ClassLabel, spec: SensitiveSpec,
                      table: JointFrequencyTable) -> float:
    """Importance weight balancing group/label frequencies; always > 0."""
    return table.weight(spec.group_of(x), y)


def massage_chunk(chunk: Sequence[tuple[Instance, ClassLabel]],
                  spec: SensitiveSpec,
                  ranker: Callable[[Instance], float] | None = None,
                  ) -> list[tuple[Instance, ClassLabel]]:
    """Relabel the minimal number of borderline pairs to equalize positive rates.

    Promotes the highest-ranked deprived negatives and demotes the
    lowest-ranked favored positives, one pair at a time, until the two
    groups' positive rates match as closely as the chunk allows. The
    ranker scores an instance's probability of being positive; by default
    a fresh Hoeffding tree trained on the chunk is used. Instance order
    is preserved and inputs are not mutated.
    """
    chunk = list(chunk)
    if ranker is None:
        ranker = _default_ranker(chunk, spec.positive)

    dep_total = fav_total = dep_pos = fav_pos = 0
    for x, y in chunk:
        g = spec.group_of(x)
        if g == spec.deprived:
            dep_total += 1
            dep_pos += y == spec.positive
        elif g == spec.favored:
            fav_total += 1
            fav_pos += y == spec.positive
    if dep_total == 0 or fav_total == 0:
        return chunk

    # smallest M with (fav_pos - M)/fav_total <= (dep_pos + M)/dep_total
    exact = (fav_pos * dep_total - dep_pos * fav_total) / (dep_total + fav_total)
    m = max(0, math.ceil(exact))

    promotable = [(i, ranker(chunk[i][0])) for i, (x, y) in enumerate(chunk)
                  if spec.group_of(x) == spec.deprived and y != spec.positive]
    demotable = [(i, ranker(chunk[i][0])) for i, (x, y) in enumerate(chunk)
                 if spec.group_of(x) == spec.favored and y == spec.positive]
    m = min(m, len(promotable), len(demotable))
    if m == 0:
        return chunk

    promotable.sort(key=lambda t: (-t[1], t[0]))
    demotable.sort(key=lambda t: (t[1], t[0]))

    out = list(chunk)
    negative = _other_label(chunk, spec.positive)
    for i, _ in promotable[:m]:
        out[i] = (out[i][0], spec.positive)
    for i, _ in demotable[:m]:
        out[i] = (out[i][0], negative)
    return out


def _other_label(chunk, positive):
    for _, y in chunk:
        if y != positive:
            return y
    raise ValueError("chunk has no non-positive label to demote to")


def _default_ranker(chunk, positive):
    from .tree import HoeffdingTreeClassifier

    model = HoeffdingTreeClassifier()
    for x, y in chunk:
        model.learn_one(x, y)
    return lambda x: model.predict_proba_one(x).get(positive, 0.0)


def smote_interpolate(x: Instance, neighbor: Instance, u: float) -> Instance:
    """Convex combination of two instances along their shared numeric features.

    Numeric features move ``u`` of the way from ``x`` toward ``neighbor``;
    categorical features copy from ``x``.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"interpolation factor outside [0, 1]: {u!r}")
    out: Instance = {}
    for name, value in x.items():
        if is_numeric(value) and name in neighbor and is_numeric(neighbor[name]):
            v = float(value)
            out[name] = v + u * (float(neighbor[name]) - v)
        else:
            out[name] = value
    return out


class CSmoteOversampler:
    """Drift-aware minority oversampling for binary label streams.

    Keeps a bounded window of recent labeled instances; an ADWIN detector
    over the minority-membership indicator evicts the pre-change portion
    of the window when the class mix shifts. After each arrival,
    synthetic minority instances (SMOTE interpolations between window
    minority members) are fed to the learner until minority mass reaches
    the balance target. Synthetic instances always carry the minority
    label and are never added to the window.
    """

    def __init__(self, k: int = 5, window_capacity: int = 1000,
                 balance_target: float = 0.5, seed: int = 0,
                 delta_change: float = 0.002, delta_warning: float = 0.01):
        if k < 1:
            raise ValueError("k must be >= 1")
        if window_capacity < 2:
            raise ValueError("window_capacity must be >= 2")
        if not 0.0 < balance_target < 1.0:
            raise ValueError("balance_target must lie in (0, 1)")
        self.k = k
        self.window_capacity = window_capacity
        self.balance_target = balance_target
        self._window: deque[tuple[Instance, ClassLabel]] = deque()
        self._counts: Counter = Counter()
        self._adwin = Adwin(delta_change=delta_change, delta_warning=delta_warning)
        self._minority: ClassLabel | None = None
        self._synth_since_reset = 0
        self._rng = np.random.default_rng(seed)

    @property
    def window_size(self) -> int:
        return len(self._window)

    @property
    def minority_label(self) -> ClassLabel | None:
        return self._minority

    def step(self, x: Instance, y: ClassLabel,
             learn: Callable[[Instance, ClassLabel], None]) -> int:
        """Insert (x, y), manage the window, emit synthetics; returns how many."""
        if len(self._window) >= self.window_capacity:
            _, evicted_y = self._window.popleft()
            self._counts[evicted_y] -= 1
        self._window.append((x, y))
        self._counts[y] += 1
        self._refresh_minority()

        state = self._adwin.update(1.0 if y == self._minority else 0.0)
        if state is DriftState.CHANGE:
            retain = min(self._adwin.width, len(self._window))
            while len(self._window) > retain:
                _, evicted_y = self._window.popleft()
                self._counts[evicted_y] -= 1
            self._synth_since_reset = 0
            self._refresh_minority()

        return self._rebalance(learn)

    def _refresh_minority(self) -> None:
        present = [label for label, c in self._counts.items() if c > 0]
        if len(present) < 2:
            self._minority = present[0] if present else None
            return
        if len(present) > 2:
            raise ValueError("oversampler supports binary label streams only")
        a, b = present
        if self._counts[a] == self._counts[b]:
            if self._minority not in (a, b):
                self._minority = a
            return
        self._minority = a if self._counts[a] < self._counts[b] else b

    def _rebalance(self, learn) -> int:
        minority = self._minority
        if minority is None:
            return 0
        m = self._counts[minority]
        if m < 2:
            return 0
        n = len(self._window)
        fed = 0
        pool: list[Instance] | None = None
        while ((m + self._synth_since_reset)
               / (n + self._synth_since_reset)) < self.balance_target:
            if pool is None:
                pool = [xi for xi, yi in self._window if yi == minority]
            synthetic = self._synthesize(pool)
            learn(synthetic, minority)
            self._synth_since_reset += 1
            fed += 1
        return fed

    def _synthesize(self, pool: list[Instance]) -> Instance:
        base_idx = int(self._rng.integers(len(pool)))
        base = pool[base_idx]
        ranked = sorted(
            (i for i in range(len(pool)) if i != base_idx),
            key=lambda i: (_distance(base, pool[i]), i),
        )
        neighbors = ranked[: min(self.k, len(ranked))]
        pick = neighbors[int(self._rng.integers(len(neighbors)))]
        u = float(self._rng.random())
        return smote_interpolate(base, pool[pick], u)

    def memory_estimate(self) -> int:
        per_instance = 120
        if self._window:
            per_instance += 72 * len(self._window[0][0])
        return (per_instance * len(self._window)
                + self._adwin.memory_estimate() + 128)


def _distance(a: Instance, b: Instance) -> float:
    total = 0.0
    for name, value in a.items():
        if is_numeric(value) and name in b and is_numeric(b[name]):
            d = float(value) - float(b[name])
            total += d * d
    return math.sqrt(total)
