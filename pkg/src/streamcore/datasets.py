"""Stream sources: CSV files and seeded synthetic generators.

All generators are deterministic functions of their config seed and use
constant memory regardless of stream length; every source yields
``(instance, label)`` pairs through :class:`~streamcore.core.StreamSource`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import ClassLabel, Instance, StreamSource


@dataclass(frozen=True)
class CsvStreamConfig:
    path: str
    label: str
    delimiter: str = ","
    header: bool = True


def _parse_label(cell: str) -> ClassLabel:
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        value = float(cell)
    except ValueError:
        return cell
    if not math.isfinite(value):
        raise ValueError("non-finite label")
    return value


def read_csv_stream(config: CsvStreamConfig) -> StreamSource:
    """Stream a delimited file as (features, label) pairs.

    Cells that parse as numbers become floats, everything else stays a
    string, and empty cells are dropped (treated as missing). Header and
    label-column problems surface immediately; malformed data rows raise
    ValueError naming the 1-based line, and no later row is consumed.
    """
    handle = open(config.path, newline="")
    try:
        reader = csv.reader(handle, delimiter=config.delimiter)
        if config.header:
            try:
                names = next(reader)
            except StopIteration:
                raise ValueError(f"{config.path}: empty file") from None
            if config.label not in names:
                raise ValueError(
                    f"{config.path}: label column {config.label!r} not found"
                )
            first_line = 2
        else:
            names = None
            first_line = 1
    except Exception:
        handle.close()
        raise

    def rows():
        with handle:
            row_names = names
            line = first_line
            for row in reader:
                if not row:
                    line += 1
                    continue
                if row_names is None:
                    row_names = [f"c{i}" for i in range(len(row))]
                    if config.label not in row_names:
                        raise ValueError(
                            f"{config.path}: label column "
                            f"{config.label!r} not found"
                        )
                if len(row) != len(row_names):
                    raise ValueError(
                        f"{config.path}: line {line}: expected "
                        f"{len(row_names)} cells, got {len(row)}"
                    )
                x: Instance = {}
                y = None
                for name, cell in zip(row_names, row):
                    if name == config.label:
                        if cell == "":
                            raise ValueError(
                                f"{config.path}: line {line}: empty label"
                            )
                        try:
                            y = _parse_label(cell)
                        except ValueError:
                            raise ValueError(
                                f"{config.path}: line {line}: "
                                "non-finite label"
                            ) from None
                        continue
                    if cell == "":
                        continue
                    try:
                        value = float(cell)
                    except ValueError:
                        x[name] = cell
                        continue
                    if not math.isfinite(value):
                        raise ValueError(
                            f"{config.path}: line {line}: non-finite "
                            f"value in column {name!r}"
                        )
                    x[name] = value
                yield x, y
                line += 1

    return StreamSource(rows())


@dataclass(frozen=True)
class AbruptDriftConfig:
    n_features: int = 5
    n_classes: int = 2
    drift_positions: tuple[int, ...] = ()
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise must be in [0, 1)")
        if any(p < 0 for p in self.drift_positions):
            raise ValueError("drift positions must be non-negative")
        if any(b <= a for a, b in zip(self.drift_positions,
                                      self.drift_positions[1:])):
            raise ValueError("drift positions must be strictly increasing")


def _draw_concept(rng: np.random.Generator, n_classes: int, n_features: int):
    weights = rng.normal(size=(n_classes, n_features))
    # Centering the bias at the hypercube midpoint keeps classes balanced.
    biases = -0.5 * weights.sum(axis=1)
    return weights, biases


def _concept_label(weights, biases, values) -> int:
    scores = weights @ values + biases
    return int(np.argmax(scores))


def gen_abrupt_drift(config: AbruptDriftConfig, n: int) -> StreamSource:
    """Random linear multi-class concept over U(0,1) features.

    At each position listed in ``drift_positions`` the concept is redrawn
    before that instance is emitted, producing an abrupt change in the
    feature-label relation while the feature distribution stays fixed.
    ``noise`` flips each label to a uniformly random other class.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    drifts = set(config.drift_positions)

    def items():
        rng = np.random.default_rng(config.seed)
        weights, biases = _draw_concept(rng, config.n_classes,
                                        config.n_features)
        for i in range(n):
            if i in drifts and i > 0:
                weights, biases = _draw_concept(rng, config.n_classes,
                                                config.n_features)
            values = rng.random(config.n_features)
            label = _concept_label(weights, biases, values)
            if config.noise > 0.0 and rng.random() < config.noise:
                offset = int(rng.integers(1, config.n_classes))
                label = (label + offset) % config.n_classes
            x = {f"f{j}": float(values[j]) for j in range(config.n_features)}
            yield x, label

    return StreamSource(items())


@dataclass(frozen=True)
class ImbalancedAnomalyConfig:
    n_features: int = 96
    anomaly_rate: float = 0.01
    separation: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if not 0.0 < self.anomaly_rate < 0.5:
            raise ValueError("anomaly_rate must be in (0, 0.5)")
        if self.separation < 0.0:
            raise ValueError("separation must be >= 0")


_CLUSTER_CENTER = 0.45
_CLUSTER_SIGMA = 0.02
# fraction of coordinates displaced positively; the rest go negative
_DISPLACE_SHARE = 0.75


def gen_imbalanced_anomaly(config: ImbalancedAnomalyConfig,
                           n: int) -> StreamSource:
    """Rare anomalies displaced from one Gaussian cluster in [0, 1]^d.

    Normal traffic is a tight isotropic Gaussian cluster. Anomalies are
    displaced by a sign pattern redrawn per instance (each coordinate
    shifted up with probability 0.75, down otherwise), scaled so the mean
    displacement vector has Euclidean norm ``separation``. The displaced
    cluster's own spread shrinks as it moves away (sigma / (1 + 2 sep)),
    so at separation 0 both the displacement and the tightening vanish
    and anomalies match normal traffic exactly. Labels are booleans
    (True = anomaly).
    """
    if n < 0:
        raise ValueError("n must be >= 0")

    def items():
        rng = np.random.default_rng(config.seed)
        d = config.n_features
        rate = config.anomaly_rate
        center = np.full(d, _CLUSTER_CENTER)
        p = _DISPLACE_SHARE
        step = config.separation / ((2.0 * p - 1.0) * math.sqrt(d))
        spread = _CLUSTER_SIGMA / (1.0 + 2.0 * config.separation)
        names = [f"f{j}" for j in range(d)]
        for _ in range(n):
            is_anomaly = bool(rng.random() < rate)
            if is_anomaly:
                signs = np.where(rng.random(d) < p, 1.0, -1.0)
                values = rng.normal(center + signs * step, spread)
            else:
                values = rng.normal(center, _CLUSTER_SIGMA)
            values = np.clip(values, 0.0, 1.0)
            yield dict(zip(names, values.tolist())), is_anomaly

    return StreamSource(items())


@dataclass(frozen=True)
class BiasedFairnessConfig:
    n_features: int = 4
    suppression: float = 0.5
    seed: int = 0
    sensitive_feature: str = "group"
    deprived: str = "dep"
    favored: str = "fav"
    clean_labels: bool = False

    def __post_init__(self):
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if not 0.0 < self.suppression <= 1.0:
            raise ValueError("suppression must be in (0, 1]")


def gen_biased_fair(config: BiasedFairnessConfig, n: int) -> StreamSource:
    """Binary stream whose labels under-report deprived-group positives.

    Group membership is an independent fair coin; the true concept is a
    linear rule over the numeric features only. A deprived instance whose
    true label is positive keeps it with probability ``suppression``,
    otherwise the emitted label flips to negative. ``clean_labels=True``
    emits the unsuppressed labels from the identical random sequence, so
    two streams with the same seed pair instance for instance.
    """
    if n < 0:
        raise ValueError("n must be >= 0")

    def items():
        rng = np.random.default_rng(config.seed)
        weights, biases = _draw_concept(rng, 2, config.n_features)
        for _ in range(n):
            group = config.deprived if rng.random() < 0.5 else config.favored
            values = rng.random(config.n_features)
            clean = _concept_label(weights, biases, values)
            label = clean
            if clean == 1 and group == config.deprived:
                # Drawn unconditionally on the branch so clean and biased
                # streams from one seed stay instance-aligned.
                if rng.random() >= config.suppression:
                    label = 0
            x = {f"f{j}": float(values[j]) for j in range(config.n_features)}
            x[config.sensitive_feature] = group
            yield x, (clean if config.clean_labels else label)

    return StreamSource(items())
