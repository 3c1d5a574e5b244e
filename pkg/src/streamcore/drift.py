"""Drift detectors over bounded-real and error-indicator streams.

Both detectors emit exactly one state per update: STABLE, WARNING (drop
confidence level) or CHANGE (strict confidence level, window/statistics
reset).
"""

from __future__ import annotations

import enum
import math
from collections import deque


class DriftState(enum.Enum):
    STABLE = "stable"
    WARNING = "warning"
    CHANGE = "change"


class Adwin:
    """Adaptive-windowing detector over values in [0, 1].

    The window is an exponential histogram: row ``i`` holds buckets of
    2**i values (stored as their sum), newest rows first, at most
    ``max_buckets`` buckets per row before the two oldest merge into the
    next row. Every update tests every bucket boundary as a candidate
    cut; a mean difference exceeding the bound at ``delta_change`` drops
    the older sub-window, exceeding it only at ``delta_warning`` flags a
    warning.
    """

    def __init__(self, delta_change: float = 0.002, delta_warning: float = 0.01,
                 max_buckets: int = 5):
        if not (0.0 < delta_change < 1.0 and 0.0 < delta_warning < 1.0):
            raise ValueError("deltas must lie in (0, 1)")
        if delta_change > delta_warning:
            raise ValueError("delta_change must not exceed delta_warning")
        if max_buckets < 1:
            raise ValueError("max_buckets must be >= 1")
        self.delta_change = delta_change
        self.delta_warning = delta_warning
        self.max_buckets = max_buckets
        # rows[i]: deque of bucket sums, each bucket covering 2**i values,
        # newest bucket on the left; row 0 is newest data overall.
        self._rows: list[deque[float]] = [deque()]
        self.total_count = 0
        self.total_sum = 0.0

    def update(self, value: float) -> DriftState:
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"value is not finite: {value!r}")
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"value outside [0, 1]: {value!r}")
        self._rows[0].appendleft(value)
        self.total_count += 1
        self.total_sum += value
        self._compress()

        changed = False
        while True:
            warning_seen, cut = self._scan()
            if cut is None:
                break
            self._drop_oldest(*cut)
            changed = True
        if changed:
            return DriftState.CHANGE
        return DriftState.WARNING if warning_seen else DriftState.STABLE

    def window_stats(self) -> tuple[int, float]:
        """(count, mean) of the retained window; (0, 0.0) when empty."""
        if self.total_count == 0:
            return (0, 0.0)
        return (self.total_count, self.total_sum / self.total_count)

    @property
    def width(self) -> int:
        return self.total_count

    def bucket_count(self) -> int:
        return sum(len(row) for row in self._rows)

    def memory_estimate(self) -> int:
        # one float sum per bucket plus deque/row overhead
        return 96 + 64 * len(self._rows) + 16 * self.bucket_count()

    # internal ------------------------------------------------------------

    def _compress(self) -> None:
        i = 0
        while i < len(self._rows):
            row = self._rows[i]
            if len(row) <= self.max_buckets:
                break
            older = row.pop()
            newer = row.pop()
            if i + 1 == len(self._rows):
                self._rows.append(deque())
            self._rows[i + 1].appendleft(newer + older)
            i += 1

    def _iter_oldest_first(self):
        """Yield (sum, count) per bucket from the oldest to the newest."""
        for i in range(len(self._rows) - 1, -1, -1):
            count = 1 << i
            for bucket in reversed(self._rows[i]):
                yield bucket, count

    def _scan(self):
        """Test every cut; return (warning_seen, change_cut_or_None).

        A cut is (buckets_from_old_end, dropped_count, dropped_sum) for
        the first boundary violating the change-level bound.
        """
        n = self.total_count
        if n < 2:
            return (False, None)
        log_change = math.log(4.0 * n / self.delta_change)
        log_warning = math.log(4.0 * n / self.delta_warning)
        warning_seen = False
        n0 = 0
        sum0 = 0.0
        k = 0
        for bucket_sum, bucket_count in self._iter_oldest_first():
            n0 += bucket_count
            sum0 += bucket_sum
            k += 1
            n1 = n - n0
            if n1 <= 0:
                break
            mean0 = sum0 / n0
            mean1 = (self.total_sum - sum0) / n1
            diff = abs(mean0 - mean1)
            inv_2m = (1.0 / n0 + 1.0 / n1) / 2.0
            if diff >= math.sqrt(inv_2m * log_change):
                return (warning_seen, (k, n0, sum0))
            if diff >= math.sqrt(inv_2m * log_warning):
                warning_seen = True
        return (warning_seen, None)

    def _drop_oldest(self, k: int, dropped_count: int, dropped_sum: float) -> None:
        while k > 0:
            row = self._rows[-1]
            row.pop()
            while self._rows and not self._rows[-1] and len(self._rows) > 1:
                self._rows.pop()
            k -= 1
        self.total_count -= dropped_count
        self.total_sum -= dropped_sum


class Eddm:
    """Distance-between-errors drift detector for binary error streams.

    Tracks Welford statistics over the distances (in steps) between
    consecutive errors and compares mean + 2*std against its running
    maximum: ratios below ``alpha`` warn, below ``beta`` signal change
    (after a minimum number of errors). Statistics mutate only on error
    events; correct observations advance the step counter alone.
    """

    def __init__(self, alpha: float = 0.95, beta: float = 0.9, min_errors: int = 30):
        if not 0.0 < beta < alpha < 1.0:
            raise ValueError("need 0 < beta < alpha < 1")
        if min_errors < 1:
            raise ValueError("min_errors must be >= 1")
        self.alpha = alpha
        self.beta = beta
        self.min_errors = min_errors
        self.steps = 0
        self._reset_stats()

    def _reset_stats(self) -> None:
        self.n_errors = 0
        self._last_error_step: int | None = None
        self._d_count = 0
        self._d_mean = 0.0
        self._d_m2 = 0.0
        self._max_score = 0.0

    def update(self, error_occurred: bool) -> DriftState:
        self.steps += 1
        if not error_occurred:
            return DriftState.STABLE
        self.n_errors += 1
        if self._last_error_step is not None:
            distance = float(self.steps - self._last_error_step)
            self._d_count += 1
            delta = distance - self._d_mean
            self._d_mean += delta / self._d_count
            self._d_m2 += delta * (distance - self._d_mean)
        self._last_error_step = self.steps
        if self._d_count == 0:
            return DriftState.STABLE

        std = math.sqrt(self._d_m2 / self._d_count)
        score = self._d_mean + 2.0 * std
        if score > self._max_score:
            self._max_score = score
            return DriftState.STABLE
        ratio = score / self._max_score if self._max_score > 0.0 else 1.0
        if self.n_errors < self.min_errors:
            return DriftState.STABLE
        if ratio < self.beta:
            self._reset_stats()
            return DriftState.CHANGE
        if ratio < self.alpha:
            return DriftState.WARNING
        return DriftState.STABLE

    def distance_stats(self) -> tuple[int, float, float]:
        """(count, mean, population variance) of inter-error distances."""
        if self._d_count == 0:
            return (0, 0.0, 0.0)
        return (self._d_count, self._d_mean, self._d_m2 / self._d_count)

    def memory_estimate(self) -> int:
        return 128
