"""Pure-Python twins of the compiled kernels.

Every loop mirrors the expression order of ``_speedups.pyx`` exactly, so the
two backends produce bit-identical floats and differ only in speed.
"""

from math import exp

NAME = "pure-python"

RELU = 0
SIGMOID = 1
IDENTITY = 2
SOFTMAX = 3


def affine(W, b, x, z, n_out, n_in):
    """z = W @ x + b, with W stored row-major as a flat buffer."""
    for i in range(n_out):
        acc = b[i]
        base = i * n_in
        for j in range(n_in):
            acc += W[base + j] * x[j]
        z[i] = acc


def act_forward(z, a, n, kind):
    if kind == RELU:
        for i in range(n):
            v = z[i]
            a[i] = v if v > 0.0 else 0.0
    elif kind == SIGMOID:
        for i in range(n):
            a[i] = 1.0 / (1.0 + exp(-z[i]))
    elif kind == IDENTITY:
        for i in range(n):
            a[i] = z[i]
    elif kind == SOFTMAX:
        m = z[0]
        for i in range(1, n):
            if z[i] > m:
                m = z[i]
        s = 0.0
        for i in range(n):
            e = exp(z[i] - m)
            a[i] = e
            s += e
        for i in range(n):
            a[i] = a[i] / s
    else:
        raise ValueError(f"unknown activation code {kind}")


def act_backward(z, a, delta, n, kind):
    """Multiply delta by the activation derivative, in place.

    SOFTMAX deltas must already be loss gradients w.r.t. pre-activations
    (the cross-entropy shortcut), so they pass through unchanged.
    """
    if kind == RELU:
        for i in range(n):
            if z[i] <= 0.0:
                delta[i] = 0.0
    elif kind == SIGMOID:
        for i in range(n):
            delta[i] = delta[i] * a[i] * (1.0 - a[i])
    elif kind == IDENTITY or kind == SOFTMAX:
        pass
    else:
        raise ValueError(f"unknown activation code {kind}")


def matvec_t(W, delta, out, n_out, n_in):
    """out = W.T @ delta (gradient w.r.t. the layer input)."""
    for j in range(n_in):
        out[j] = 0.0
    for i in range(n_out):
        d = delta[i]
        base = i * n_in
        for j in range(n_in):
            out[j] += W[base + j] * d


def sgd_update(W, b, delta, x, lr, n_out, n_in):
    """Rank-1 gradient step: W -= lr * outer(delta, x); b -= lr * delta."""
    for i in range(n_out):
        d = lr * delta[i]
        base = i * n_in
        for j in range(n_in):
            W[base + j] -= d * x[j]
        b[i] -= d


def hst_mass(feats, thrs, ref, x, n_trees, depth):
    """Sum of stored reference masses at the leaf each tree routes x to."""
    n_internal = (1 << depth) - 1
    n_leaves = 1 << depth
    total = 0.0
    for t in range(n_trees):
        fbase = t * n_internal
        idx = 0
        for _ in range(depth):
            k = fbase + idx
            if x[feats[k]] <= thrs[k]:
                idx = 2 * idx + 1
            else:
                idx = 2 * idx + 2
        total += ref[t * n_leaves + (idx - n_internal)]
    return total


def hst_learn(feats, thrs, latest, x, n_trees, depth):
    """Add one unit of mass to the leaf each tree routes x to."""
    n_internal = (1 << depth) - 1
    n_leaves = 1 << depth
    for t in range(n_trees):
        fbase = t * n_internal
        idx = 0
        for _ in range(depth):
            k = fbase + idx
            if x[feats[k]] <= thrs[k]:
                idx = 2 * idx + 1
            else:
                idx = 2 * idx + 2
        latest[t * n_leaves + (idx - n_internal)] += 1.0
