"""Online dense networks trained one instance at a time with plain SGD.

Gradients are derived by hand and applied through the kernel backend
(compiled when available); there is no autodiff anywhere. Networks are
built lazily from the first learned instance, grow zero-initialized
input columns as new features appear (so unseen features change nothing
until they carry signal), and classifiers grow zero-initialized output
rows as new classes appear.
"""

from __future__ import annotations

import math
from array import array
from typing import Sequence

import numpy as np

from ._kernels import IDENTITY, RELU, SIGMOID, SOFTMAX, backend as K
from .core import (
    UNKNOWN_CLASS,
    AnomalyScorer,
    Classifier,
    ClassLabel,
    Instance,
    check_instance,
    is_numeric,
)

ACTIVATION_NAMES = {RELU: "relu", SIGMOID: "sigmoid",
                    IDENTITY: "identity", SOFTMAX: "softmax"}


class FeatureVectorizer:
    """Maps dict instances to dense vectors with first-seen feature order.

    Numeric features occupy one slot under their own name; categorical
    features one-hot under ``name=value`` keys. ``learn_vector`` grows the
    index; ``vector`` never does, ignoring unknown keys, so query paths
    stay mutation-free.
    """

    def __init__(self):
        self._index: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._index)

    @property
    def feature_names(self) -> list[str]:
        return list(self._index)

    def learn_vector(self, x: Instance) -> array:
        index = self._index
        for name, value in x.items():
            key = name if is_numeric(value) else f"{name}={value}"
            if key not in index:
                index[key] = len(index)
        return self.vector(x)

    def vector(self, x: Instance) -> array:
        index = self._index
        out = array("d", bytes(8 * len(index)))
        get = index.get
        for name, value in x.items():
            if type(value) is float:
                idx = get(name)
                if idx is not None:
                    out[idx] = value
            elif is_numeric(value):
                idx = get(name)
                if idx is not None:
                    out[idx] = float(value)
            else:
                idx = get(f"{name}={value}")
                if idx is not None:
                    out[idx] = 1.0
        return out

    def memory_estimate(self) -> int:
        return 64 + 56 * len(self._index)


class DenseLayer:
    """One affine map plus activation, stored as flat row-major buffers."""

    def __init__(self, n_out: int, n_in: int, activation: int,
                 rng: np.random.Generator | None = None):
        self.n_out = n_out
        self.n_in = n_in
        self.activation = activation
        if rng is None or n_in == 0:
            weights = array("d", bytes(8 * n_out * n_in))
        else:
            scale = math.sqrt(6.0 / (n_in + n_out))
            weights = array("d", rng.uniform(-scale, scale, n_out * n_in).tolist())
        self.W = weights
        self.b = array("d", bytes(8 * n_out))

    def grow_input(self, extra: int, rng: np.random.Generator | None = None) -> None:
        """Append zero-weight columns so new inputs start with no influence."""
        if extra <= 0:
            return
        new_in = self.n_in + extra
        grown = array("d", bytes(8 * self.n_out * new_in))
        for i in range(self.n_out):
            old = i * self.n_in
            new = i * new_in
            grown[new:new + self.n_in] = self.W[old:old + self.n_in]
        self.W = grown
        self.n_in = new_in

    def grow_output(self, extra: int) -> None:
        """Append zero rows (and bias slots) for newly discovered outputs."""
        if extra <= 0:
            return
        self.W.extend(array("d", bytes(8 * extra * self.n_in)))
        self.b.extend(array("d", bytes(8 * extra)))
        self.n_out += extra

    @property
    def n_params(self) -> int:
        return self.n_out * self.n_in + self.n_out


class DenseNetwork:
    """Layer stack with manual forward/backward passes."""

    def __init__(self, layers: Sequence[DenseLayer]):
        self.layers = list(layers)

    def forward(self, x: array) -> tuple[array, list[tuple[array, array, array]]]:
        """Output activation plus per-layer (input, pre-activation, activation)."""
        caches = []
        current = x
        for layer in self.layers:
            z = array("d", bytes(8 * layer.n_out))
            a = array("d", bytes(8 * layer.n_out))
            K.affine(layer.W, layer.b, current, z, layer.n_out, layer.n_in)
            K.act_forward(z, a, layer.n_out, layer.activation)
            caches.append((current, z, a))
            current = a
        return current, caches

    def predict(self, x: array) -> array:
        out, _ = self.forward(x)
        return out

    def backward(self, caches, delta_out: array, lr: float) -> None:
        """SGD step from the output-layer delta (dL/d pre-activation).

        The caller converts its loss gradient through the output
        activation first; hidden activations are handled here.
        """
        delta = delta_out
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            x_in, _, _ = caches[idx]
            if idx > 0:
                prev = self.layers[idx - 1]
                delta_prev = array("d", bytes(8 * layer.n_in))
                K.matvec_t(layer.W, delta, delta_prev, layer.n_out, layer.n_in)
                _, z_prev, a_prev = caches[idx - 1]
                K.act_backward(z_prev, a_prev, delta_prev, prev.n_out,
                               prev.activation)
            K.sgd_update(layer.W, layer.b, delta, x_in, lr,
                         layer.n_out, layer.n_in)
            if idx > 0:
                delta = delta_prev

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def parameter_checksum(self) -> float:
        total = 0.0
        for layer in self.layers:
            total += sum(layer.W) + sum(layer.b)
        return total


def mse_output_delta(output: array, target: array, z: array,
                     activation: int) -> tuple[array, float]:
    """Mean-squared-error loss and its gradient w.r.t. pre-activations."""
    n = len(output)
    delta = array("d", bytes(8 * n))
    loss = 0.0
    for i in range(n):
        diff = output[i] - target[i]
        loss += diff * diff
        delta[i] = 2.0 * diff / n
    K.act_backward(z, output, delta, n, activation)
    return delta, loss / n


def softmax_ce_output_delta(probs: array, target_idx: int,
                            w: float = 1.0) -> tuple[array, float]:
    """Cross-entropy loss and its softmax-shortcut pre-activation gradient."""
    n = len(probs)
    delta = array("d", bytes(8 * n))
    for i in range(n):
        delta[i] = w * probs[i]
    delta[target_idx] -= w
    p = max(probs[target_idx], 1e-300)
    return delta, -w * math.log(p)


class MLPClassifier(Classifier):
    """Softmax classifier with ReLU hidden layers, trained online.

    Classes are discovered from the stream; each new class appends a
    zero row to the output layer, so its initial logit is neutral.
    """

    def __init__(self, hidden: Sequence[int] = (64,), lr: float = 0.05,
                 seed: int = 0):
        hidden = tuple(int(h) for h in hidden)
        if any(h < 1 for h in hidden):
            raise ValueError(f"hidden widths must be positive: {hidden}")
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive: {lr}")
        self.hidden = hidden
        self.lr = lr
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._vectorizer = FeatureVectorizer()
        self._classes: dict[ClassLabel, int] = {}
        self._net: DenseNetwork | None = None

    @property
    def classes(self) -> list[ClassLabel]:
        return list(self._classes)

    def _build(self, n_in: int) -> None:
        layers = []
        for width in self.hidden:
            layers.append(DenseLayer(width, n_in, RELU, self._rng))
            n_in = width
        # zero-initialized output keeps the initial distribution uniform
        layers.append(DenseLayer(len(self._classes), n_in, SOFTMAX))
        self._net = DenseNetwork(layers)

    def learn_one(self, x: Instance, y: ClassLabel, w: float = 1.0) -> None:
        check_instance(x)
        if y is None:
            raise ValueError("label is required")
        if not w > 0.0:
            raise ValueError(f"weight must be positive: {w}")
        if y not in self._classes:
            self._classes[y] = len(self._classes)
            if self._net is not None:
                self._net.layers[-1].grow_output(1)
        before = len(self._vectorizer)
        vec = self._vectorizer.learn_vector(x)
        if self._net is None:
            self._build(len(self._vectorizer))
        elif len(self._vectorizer) > before:
            self._net.layers[0].grow_input(len(self._vectorizer) - before)
        probs, caches = self._net.forward(vec)
        delta, _ = softmax_ce_output_delta(probs, self._classes[y], w)
        self._net.backward(caches, delta, self.lr)

    def predict_proba_one(self, x: Instance) -> dict[ClassLabel, float]:
        if not self._classes:
            return {UNKNOWN_CLASS: 1.0}
        if self._net is None:
            p = 1.0 / len(self._classes)
            return {c: p for c in self._classes}
        vec = self._vectorizer.vector(x)
        probs = self._net.predict(vec)
        return {c: probs[idx] for c, idx in self._classes.items()}

    def memory_estimate(self) -> int:
        total = 128 + self._vectorizer.memory_estimate() + 48 * len(self._classes)
        if self._net is not None:
            total += 8 * self._net.n_params
        return total


class OnlineAutoencoder(AnomalyScorer):
    """Reconstruction-error anomaly scorer: ReLU encoder, sigmoid decoder.

    ``score_one`` is the mean squared reconstruction error of the
    instance (inputs are expected in [0, 1], e.g. min-max scaled) and
    never mutates state; ``learn_one`` runs one SGD step against the
    instance as its own target.
    """

    def __init__(self, latent_dim: int = 64, lr: float = 0.25, seed: int = 0):
        if latent_dim < 1:
            raise ValueError(f"latent_dim must be positive: {latent_dim}")
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive: {lr}")
        self.latent_dim = latent_dim
        self.lr = lr
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._vectorizer = FeatureVectorizer()
        self._net: DenseNetwork | None = None

    def _build(self, n_in: int) -> None:
        self._net = DenseNetwork([
            DenseLayer(self.latent_dim, n_in, RELU, self._rng),
            DenseLayer(n_in, self.latent_dim, SIGMOID, self._rng),
        ])

    def learn_one(self, x: Instance) -> None:
        check_instance(x)
        before = len(self._vectorizer)
        vec = self._vectorizer.learn_vector(x)
        if self._net is None:
            self._build(len(self._vectorizer))
        elif len(self._vectorizer) > before:
            self._net.layers[0].grow_input(len(self._vectorizer) - before)
            self._net.layers[1].grow_output(len(self._vectorizer) - before)
        out, caches = self._net.forward(vec)
        _, z_out, _ = caches[-1]
        delta, _ = mse_output_delta(out, vec, z_out, SIGMOID)
        self._net.backward(caches, delta, self.lr)

    def score_one(self, x: Instance) -> float:
        check_instance(x)
        if self._net is None or len(self._vectorizer) == 0:
            return 0.0
        vec = self._vectorizer.vector(x)
        out = self._net.predict(vec)
        total = 0.0
        for a, b in zip(out, vec):
            diff = a - b
            total += diff * diff
        return total / len(vec)

    def reconstruction(self, x: Instance) -> array:
        """Decoder output for x (diagnostic; empty before any learning)."""
        if self._net is None:
            return array("d")
        return self._net.predict(self._vectorizer.vector(x))

    def parameter_checksum(self) -> float:
        return 0.0 if self._net is None else self._net.parameter_checksum()

    def memory_estimate(self) -> int:
        total = 128 + self._vectorizer.memory_estimate()
        if self._net is not None:
            total += 8 * self._net.n_params
        return total
