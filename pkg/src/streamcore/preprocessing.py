"""Online feature scaling with per-feature running statistics.

Categorical values pass through untouched; numeric features are rescaled
from statistics accumulated so far. Unseen features transform to 0.
"""

from __future__ import annotations

import math

from .core import Instance, Transformer, check_instance, is_numeric


class MinMaxScaler(Transformer):
    """Rescale numerics to [0, 1] using running per-feature min/max.

    Degenerate features (min == max so far) and never-seen features map
    to 0. Output is clamped, so values outside the seen range stay in
    [0, 1].
    """

    def __init__(self):
        self._ranges: dict[str, list[float]] = {}

    def learn_one(self, x: Instance) -> None:
        check_instance(x)
        ranges = self._ranges
        for name, value in x.items():
            if type(value) is not float:
                if not is_numeric(value):
                    continue
                value = float(value)
            r = ranges.get(name)
            if r is None:
                ranges[name] = [value, value]
            elif value < r[0]:
                r[0] = value
            elif value > r[1]:
                r[1] = value

    def transform_one(self, x: Instance) -> Instance:
        out: Instance = {}
        get = self._ranges.get
        for name, value in x.items():
            if type(value) is not float:
                if not is_numeric(value):
                    out[name] = value
                    continue
                value = float(value)
            r = get(name)
            if r is None:
                out[name] = 0.0
                continue
            lo, hi = r
            if lo == hi:
                out[name] = 0.0
            else:
                v = (value - lo) / (hi - lo)
                out[name] = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
        return out

    def memory_estimate(self) -> int:
        # two floats plus dict-slot overhead per tracked feature
        return 64 + 48 * len(self._ranges)


class StandardScaler(Transformer):
    """Standardize numerics with Welford-updated mean/variance.

    Uses the population variance; the standard deviation is floored at
    1e-12 so constant features transform to 0 instead of dividing by zero.
    """

    _STD_FLOOR = 1e-12

    def __init__(self):
        # name -> [count, mean, m2]
        self._stats: dict[str, list[float]] = {}

    def learn_one(self, x: Instance) -> None:
        check_instance(x)
        stats = self._stats
        for name, value in x.items():
            if type(value) is not float:
                if not is_numeric(value):
                    continue
                value = float(value)
            s = stats.get(name)
            if s is None:
                stats[name] = [1.0, value, 0.0]
            else:
                s[0] += 1.0
                delta = value - s[1]
                s[1] += delta / s[0]
                s[2] += delta * (value - s[1])

    def transform_one(self, x: Instance) -> Instance:
        out: Instance = {}
        get = self._stats.get
        sqrt = math.sqrt
        floor = self._STD_FLOOR
        for name, value in x.items():
            if type(value) is not float:
                if not is_numeric(value):
                    out[name] = value
                    continue
                value = float(value)
            s = get(name)
            if s is None:
                out[name] = 0.0
            else:
                std = sqrt(s[2] / s[0])
                out[name] = (value - s[1]) / (std if std > floor else floor)
        return out

    def stats(self, name: str) -> tuple[float, float, float]:
        """(count, mean, population variance) for one feature."""
        s = self._stats.get(name)
        if s is None:
            return (0.0, 0.0, 0.0)
        return (s[0], s[1], s[2] / s[0])

    def memory_estimate(self) -> int:
        return 64 + 56 * len(self._stats)
