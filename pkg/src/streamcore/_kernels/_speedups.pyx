# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled kernels for the per-instance hot loops.

Expression order matches pyfallback.py exactly; with -ffp-contract=off the
C build rounds identically to CPython floats, keeping backends bit-equal.
"""

from libc.math cimport exp

NAME = "compiled"

RELU = 0
SIGMOID = 1
IDENTITY = 2
SOFTMAX = 3

cdef int _RELU = 0
cdef int _SIGMOID = 1
cdef int _IDENTITY = 2
cdef int _SOFTMAX = 3


def affine(double[:] W, double[:] b, double[:] x, double[:] z, int n_out, int n_in):
    """z = W @ x + b, with W stored row-major as a flat buffer."""
    cdef int i, j, base
    cdef double acc
    for i in range(n_out):
        acc = b[i]
        base = i * n_in
        for j in range(n_in):
            acc += W[base + j] * x[j]
        z[i] = acc


def act_forward(double[:] z, double[:] a, int n, int kind):
    cdef int i
    cdef double v, m, s, e
    if kind == _RELU:
        for i in range(n):
            v = z[i]
            a[i] = v if v > 0.0 else 0.0
    elif kind == _SIGMOID:
        for i in range(n):
            a[i] = 1.0 / (1.0 + exp(-z[i]))
    elif kind == _IDENTITY:
        for i in range(n):
            a[i] = z[i]
    elif kind == _SOFTMAX:
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


def act_backward(double[:] z, double[:] a, double[:] delta, int n, int kind):
    """Multiply delta by the activation derivative, in place.

    SOFTMAX deltas must already be loss gradients w.r.t. pre-activations
    (the cross-entropy shortcut), so they pass through unchanged.
    """
    cdef int i
    if kind == _RELU:
        for i in range(n):
            if z[i] <= 0.0:
                delta[i] = 0.0
    elif kind == _SIGMOID:
        for i in range(n):
            delta[i] = delta[i] * a[i] * (1.0 - a[i])
    elif kind == _IDENTITY or kind == _SOFTMAX:
        pass
    else:
        raise ValueError(f"unknown activation code {kind}")


def matvec_t(double[:] W, double[:] delta, double[:] out, int n_out, int n_in):
    """out = W.T @ delta (gradient w.r.t. the layer input)."""
    cdef int i, j, base
    cdef double d
    for j in range(n_in):
        out[j] = 0.0
    for i in range(n_out):
        d = delta[i]
        base = i * n_in
        for j in range(n_in):
            out[j] += W[base + j] * d


def sgd_update(double[:] W, double[:] b, double[:] delta, double[:] x, double lr, int n_out, int n_in):
    """Rank-1 gradient step: W -= lr * outer(delta, x); b -= lr * delta."""
    cdef int i, j, base
    cdef double d
    for i in range(n_out):
        d = lr * delta[i]
        base = i * n_in
        for j in range(n_in):
            W[base + j] -= d * x[j]
        b[i] -= d


def hst_mass(int[:] feats, double[:] thrs, double[:] ref, double[:] x, int n_trees, int depth):
    """Sum of stored reference masses at the leaf each tree routes x to."""
    cdef int n_internal = (1 << depth) - 1
    cdef int n_leaves = 1 << depth
    cdef double total = 0.0
    cdef int t, idx, fbase, k, step
    for t in range(n_trees):
        fbase = t * n_internal
        idx = 0
        for step in range(depth):
            k = fbase + idx
            if x[feats[k]] <= thrs[k]:
                idx = 2 * idx + 1
            else:
                idx = 2 * idx + 2
        total += ref[t * n_leaves + (idx - n_internal)]
    return total


def hst_learn(int[:] feats, double[:] thrs, double[:] latest, double[:] x, int n_trees, int depth):
    """Add one unit of mass to the leaf each tree routes x to."""
    cdef int n_internal = (1 << depth) - 1
    cdef int n_leaves = 1 << depth
    cdef int t, idx, fbase, k, step
    for t in range(n_trees):
        fbase = t * n_internal
        idx = 0
        for step in range(depth):
            k = fbase + idx
            if x[feats[k]] <= thrs[k]:
                idx = 2 * idx + 1
            else:
                idx = 2 * idx + 2
        latest[t * n_leaves + (idx - n_internal)] += 1.0
