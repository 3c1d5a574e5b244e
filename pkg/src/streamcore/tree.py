"""Incremental decision tree with Hoeffding-bound split decisions.

Leaves accumulate sufficient statistics only (class counts, per-class
Gaussians for numeric features, value counts for categorical ones); a
split is installed once the best candidate's merit beats the runner-up
by the Hoeffding bound, or the bound shrinks below the tie threshold.
With a ``SensitiveSpec`` configured, candidate merit becomes the
fairness-adjusted information gain, which suppresses splits that would
route the deprived group away from positive-majority leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import (
    UNKNOWN_CLASS,
    Classifier,
    ClassLabel,
    ContractError,
    Instance,
    check_instance,
    is_numeric,
)
from .fairness import SensitiveSpec

#: Candidate thresholds tried per numeric feature at each split attempt.
NUMERIC_SPLIT_CANDIDATES = 10

_PARTITION_TOL = 1e-6


def _entropy(counts: Mapping[ClassLabel, float]) -> float:
    total = sum(counts.values())
    if total <= 0.0:
        return 0.0
    h = 0.0
    for c in counts.values():
        if c > 0.0:
            p = c / total
            h -= p * math.log2(p)
    return h


def _check_partition(parent: Mapping[ClassLabel, float],
                     children: Sequence[Mapping[ClassLabel, float]]) -> None:
    labels = set(parent)
    for child in children:
        labels.update(child)
    for label in labels:
        total = sum(child.get(label, 0.0) for child in children)
        expected = parent.get(label, 0.0)
        if abs(total - expected) > _PARTITION_TOL * max(1.0, abs(expected)):
            raise ContractError(
                f"children do not partition parent for label {label!r}: "
                f"{total} vs {expected}"
            )


def compute_info_gain(parent: Mapping[ClassLabel, float],
                      children: Sequence[Mapping[ClassLabel, float]]) -> float:
    """Shannon information gain (bits) of a candidate partition.

    Children must partition the parent counts label by label.
    """
    for counts in (parent, *children):
        for label, c in counts.items():
            if c < 0.0:
                raise ValueError(f"negative count for label {label!r}: {c}")
    _check_partition(parent, children)
    total = sum(parent.values())
    if total <= 0.0:
        return 0.0
    gain = _entropy(parent)
    for child in children:
        child_total = sum(child.values())
        if child_total > 0.0:
            gain -= (child_total / total) * _entropy(child)
    return gain


GroupTable = Mapping[ClassLabel, Mapping[ClassLabel, float]]


def compute_fairness_gain(parent: GroupTable,
                          children: Sequence[GroupTable],
                          spec: SensitiveSpec) -> float:
    """Signed parity improvement of a candidate partition.

    Each child assigns its majority label to all of its instances; the
    gain is the deprived group's share of positive-majority children
    minus the favored group's share. Positive when the split routes the
    deprived group toward positive-majority leaves; negative in the
    opposite direction. The parent table fixes group totals and is
    checked to be the exact aggregate of the children.
    """
    parent_flat = _flatten_group_table(parent)
    children_flat = [_flatten_group_table(child) for child in children]
    _check_partition(parent_flat, children_flat)

    n_dep = sum(parent.get(spec.deprived, {}).values())
    n_fav = sum(parent.get(spec.favored, {}).values())
    if n_dep <= 0.0 or n_fav <= 0.0:
        return 0.0

    gain = 0.0
    for child in children:
        class_totals: dict[ClassLabel, float] = {}
        for group_counts in child.values():
            for label, c in group_counts.items():
                class_totals[label] = class_totals.get(label, 0.0) + c
        if not class_totals or sum(class_totals.values()) <= 0.0:
            continue
        majority = max(class_totals.items(), key=lambda kv: kv[1])[0]
        if majority == spec.positive:
            dep_share = sum(child.get(spec.deprived, {}).values()) / n_dep
            fav_share = sum(child.get(spec.favored, {}).values()) / n_fav
            gain += dep_share - fav_share
    return gain


def _flatten_group_table(table: GroupTable) -> dict[tuple, float]:
    flat: dict[tuple, float] = {}
    for group, counts in table.items():
        for label, c in counts.items():
            if c < 0.0:
                raise ValueError(f"negative count for {(group, label)!r}: {c}")
            flat[(group, label)] = flat.get((group, label), 0.0) + c
    return flat


def fair_information_gain(info_gain: float, fairness_gain: float) -> float:
    """Merit of a candidate split: info gain scaled by (1 + fairness gain).

    Floored at zero so strongly unfair splits are never preferred over
    not splitting.
    """
    if info_gain < 0.0:
        raise ValueError(f"information gain must be non-negative: {info_gain}")
    return max(0.0, info_gain * (1.0 + fairness_gain))


def hoeffding_bound(value_range: float, delta: float, n: float) -> float:
    """Hoeffding deviation bound for a mean of n observations in a range."""
    if value_range <= 0.0:
        raise ValueError(f"value_range must be positive: {value_range}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1]: {delta}")
    if n < 1:
        raise ValueError(f"need at least one observation, got {n}")
    return math.sqrt(value_range * value_range * math.log(1.0 / delta) / (2.0 * n))


def _normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@dataclass(frozen=True)
class SplitSuggestion:
    feature: str
    kind: str  # "numeric" | "categorical"
    threshold: float | None
    values: tuple | None
    info_gain: float
    fairness_gain: float
    merit: float


class _Leaf:
    __slots__ = ("class_counts", "total_weight", "n_instances", "num_stats",
                 "num_range", "cat_stats", "group_class")

    def __init__(self):
        self.class_counts: dict[ClassLabel, float] = {}
        self.total_weight = 0.0
        self.n_instances = 0
        # feature -> label -> [weight, mean, m2]
        self.num_stats: dict[str, dict[ClassLabel, list[float]]] = {}
        self.num_range: dict[str, list[float]] = {}
        # feature -> value -> label -> weight
        self.cat_stats: dict[str, dict[str, dict[ClassLabel, float]]] = {}
        self.group_class: dict[ClassLabel, dict[ClassLabel, float]] | None = None

    def update(self, x: Instance, y: ClassLabel, w: float,
               spec: SensitiveSpec | None) -> None:
        self.n_instances += 1
        self.total_weight += w
        self.class_counts[y] = self.class_counts.get(y, 0.0) + w
        for name, value in x.items():
            if is_numeric(value):
                value = float(value)
                r = self.num_range.get(name)
                if r is None:
                    self.num_range[name] = [value, value]
                else:
                    if value < r[0]:
                        r[0] = value
                    if value > r[1]:
                        r[1] = value
                per_label = self.num_stats.setdefault(name, {})
                stat = per_label.get(y)
                if stat is None:
                    per_label[y] = [w, value, 0.0]
                else:
                    stat[0] += w
                    delta = value - stat[1]
                    stat[1] += (w / stat[0]) * delta
                    stat[2] += w * delta * (value - stat[1])
            else:
                by_value = self.cat_stats.setdefault(name, {})
                counts = by_value.setdefault(value, {})
                counts[y] = counts.get(y, 0.0) + w
        if spec is not None:
            if self.group_class is None:
                self.group_class = {}
            group = x.get(spec.feature)
            counts = self.group_class.setdefault(group, {})
            counts[y] = counts.get(y, 0.0) + w

    def memory_estimate(self) -> int:
        size = 96 + 24 * len(self.class_counts) + 40 * len(self.num_range)
        for per_label in self.num_stats.values():
            size += 56 * len(per_label)
        for by_value in self.cat_stats.values():
            for counts in by_value.values():
                size += 24 + 24 * len(counts)
        if self.group_class is not None:
            for counts in self.group_class.values():
                size += 24 + 24 * len(counts)
        return size


class _Split:
    __slots__ = ("feature", "kind", "threshold", "children", "value_index")

    def __init__(self, feature: str, kind: str, threshold: float | None,
                 children: list, values: tuple | None):
        self.feature = feature
        self.kind = kind
        self.threshold = threshold
        self.children = children
        self.value_index = (
            {v: i for i, v in enumerate(values)} if values is not None else None
        )

    def route(self, x: Instance) -> int:
        """Child index for x; unseen values and missing features go left."""
        value = x.get(self.feature)
        if self.kind == "numeric":
            if value is None or not is_numeric(value):
                return 0
            return 0 if float(value) <= self.threshold else 1
        idx = self.value_index.get(value)
        return 0 if idx is None else idx


class HoeffdingTreeClassifier(Classifier):
    """Streaming decision tree; optionally fairness-aware via ``fairness``.

    ``grace_period`` arrivals at a leaf trigger one split attempt;
    ``split_confidence`` is the delta of the Hoeffding bound;
    ``tie_threshold`` installs the best split once the bound is that
    small; ``max_node_count`` caps tree size, after which leaves keep
    learning but stop splitting.
    """

    def __init__(self, grace_period: int = 200, split_confidence: float = 1e-7,
                 tie_threshold: float = 0.05, max_node_count: int = 2048,
                 fairness: SensitiveSpec | None = None):
        if grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        if not 0.0 < split_confidence < 1.0:
            raise ValueError("split_confidence must lie in (0, 1)")
        if tie_threshold < 0.0:
            raise ValueError("tie_threshold must be non-negative")
        if max_node_count < 1:
            raise ValueError("max_node_count must be >= 1")
        self.grace_period = grace_period
        self.split_confidence = split_confidence
        self.tie_threshold = tie_threshold
        self.max_node_count = max_node_count
        self.fairness = fairness
        self._root: _Leaf | _Split = _Leaf()
        self._classes: dict[ClassLabel, None] = {}
        self._node_count = 1

    @property
    def node_count(self) -> int:
        return self._node_count

    @property
    def classes(self) -> list[ClassLabel]:
        return list(self._classes)

    def learn_one(self, x: Instance, y: ClassLabel, w: float = 1.0) -> None:
        check_instance(x)
        if y is None:
            raise ValueError("label is required")
        if not w > 0.0:
            raise ValueError(f"weight must be positive: {w}")
        self._classes.setdefault(y, None)
        leaf, parent, child_idx = self._descend(x)
        leaf.update(x, y, w, self.fairness)
        if leaf.n_instances % self.grace_period == 0:
            self._attempt_split(leaf, parent, child_idx)

    def predict_proba_one(self, x: Instance) -> dict[ClassLabel, float]:
        if not self._classes:
            return {UNKNOWN_CLASS: 1.0}
        leaf, _, _ = self._descend(x)
        counts = leaf.class_counts
        total = sum(counts.values())
        k = len(self._classes)
        # add-one smoothing over the observed classes
        return {c: (counts.get(c, 0.0) + 1.0) / (total + k) for c in self._classes}

    def _descend(self, x: Instance):
        parent: _Split | None = None
        child_idx = -1
        node = self._root
        while isinstance(node, _Split):
            parent = node
            child_idx = node.route(x)
            node = node.children[child_idx]
        return node, parent, child_idx

    def _attempt_split(self, leaf: _Leaf, parent: _Split | None,
                       child_idx: int) -> None:
        if leaf.total_weight < 1.0 or len(self._classes) < 2:
            return
        suggestions = self._suggestions(leaf)
        if not suggestions:
            return
        suggestions.sort(key=lambda s: -s.merit)
        best = suggestions[0]
        second = suggestions[1].merit if len(suggestions) > 1 else 0.0
        if best.merit <= 0.0:
            return
        value_range = math.log2(max(2, len(self._classes)))
        eps = hoeffding_bound(value_range, self.split_confidence, leaf.total_weight)
        if not (best.merit - second > eps or eps < self.tie_threshold):
            return
        n_children = 2 if best.kind == "numeric" else len(best.values)
        if self._node_count + n_children > self.max_node_count:
            return
        split = _Split(best.feature, best.kind, best.threshold,
                       [_Leaf() for _ in range(n_children)], best.values)
        if parent is None:
            self._root = split
        else:
            parent.children[child_idx] = split
        self._node_count += n_children

    def _suggestions(self, leaf: _Leaf) -> list[SplitSuggestion]:
        out: list[SplitSuggestion] = []
        for feature, (lo, hi) in leaf.num_range.items():
            best = self._best_numeric(leaf, feature, lo, hi)
            if best is not None:
                out.append(best)
        for feature, by_value in leaf.cat_stats.items():
            if len(by_value) < 2:
                continue
            values = tuple(by_value)
            children = [dict(by_value[v]) for v in values]
            ig = compute_info_gain(_sum_counts(children), children)
            fg, merit = self._merit(leaf, feature, children, values, ig)
            out.append(SplitSuggestion(feature, "categorical", None, values,
                                       ig, fg, merit))
        return out

    def _best_numeric(self, leaf: _Leaf, feature: str, lo: float,
                      hi: float) -> SplitSuggestion | None:
        if hi <= lo:
            return None
        stats = leaf.num_stats.get(feature)
        if not stats:
            return None
        parent = {label: s[0] for label, s in stats.items()}
        best: SplitSuggestion | None = None
        step = (hi - lo) / (NUMERIC_SPLIT_CANDIDATES + 1)
        for i in range(1, NUMERIC_SPLIT_CANDIDATES + 1):
            t = lo + i * step
            left: dict[ClassLabel, float] = {}
            right: dict[ClassLabel, float] = {}
            for label, (n, mean, m2) in stats.items():
                if n <= 0.0:
                    continue
                sd = math.sqrt(m2 / n)
                if sd == 0.0:
                    frac = 1.0 if mean <= t else 0.0
                else:
                    frac = _normal_cdf((t - mean) / sd)
                left[label] = n * frac
                right[label] = n - left[label]
            ig = compute_info_gain(parent, [left, right])
            fg, merit = self._merit(leaf, feature, [left, right], None, ig)
            if best is None or merit > best.merit:
                best = SplitSuggestion(feature, "numeric", t, None, ig, fg, merit)
        return best

    def _merit(self, leaf: _Leaf, feature: str,
               children: Sequence[Mapping[ClassLabel, float]],
               values: tuple | None, ig: float) -> tuple[float, float]:
        spec = self.fairness
        if spec is None or leaf.group_class is None:
            return 0.0, ig
        if values is not None and feature == spec.feature:
            # splitting on the sensitive feature itself: exact group tables
            tables: list[GroupTable] = [
                {v: dict(leaf.cat_stats[feature][v])} for v in values
            ]
        else:
            tables = [self._allocate_groups(leaf, child) for child in children]
        parent_table = _sum_group_tables(tables)
        fg = compute_fairness_gain(parent_table, tables, spec)
        return fg, fair_information_gain(ig, fg)

    def _allocate_groups(self, leaf: _Leaf,
                         child: Mapping[ClassLabel, float]) -> GroupTable:
        """Spread a child's class mass over groups by the leaf's per-class mix.

        Leaf statistics keep no per-feature group detail, so candidate
        children borrow the leaf-level group composition of each class.
        """
        table: dict[ClassLabel, dict[ClassLabel, float]] = {}
        for group, per_label in leaf.group_class.items():
            row: dict[ClassLabel, float] = {}
            for label, mass in child.items():
                group_mass = per_label.get(label, 0.0)
                if group_mass <= 0.0 or mass <= 0.0:
                    continue
                class_total = sum(
                    counts.get(label, 0.0) for counts in leaf.group_class.values()
                )
                if class_total > 0.0:
                    row[label] = mass * group_mass / class_total
            table[group] = row
        return table

    def structure_signature(self):
        """Nested tuples describing the installed splits (debug/test aid)."""

        def walk(node):
            if isinstance(node, _Leaf):
                return ("leaf", round(node.total_weight, 9))
            key = node.threshold if node.kind == "numeric" else tuple(node.value_index)
            return (node.feature, key, tuple(walk(c) for c in node.children))

        return walk(self._root)

    def memory_estimate(self) -> int:
        total = 128

        def walk(node):
            nonlocal total
            if isinstance(node, _Leaf):
                total += node.memory_estimate()
            else:
                total += 96
                for child in node.children:
                    walk(child)

        walk(self._root)
        return total


def _sum_counts(children: Sequence[Mapping[ClassLabel, float]]) -> dict[ClassLabel, float]:
    out: dict[ClassLabel, float] = {}
    for child in children:
        for label, c in child.items():
            out[label] = out.get(label, 0.0) + c
    return out


def _sum_group_tables(tables: Sequence[GroupTable]) -> GroupTable:
    out: dict[ClassLabel, dict[ClassLabel, float]] = {}
    for table in tables:
        for group, counts in table.items():
            row = out.setdefault(group, {})
            for label, c in counts.items():
                row[label] = row.get(label, 0.0) + c
    return out
