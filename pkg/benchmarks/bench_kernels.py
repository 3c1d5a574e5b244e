#!/usr/bin/env python3
"""Time the kernel backends against each other on the per-instance hot paths.

Runs each workload through every importable backend on identical inputs,
reports per-call latency and the speedup of the compiled extension over
the pure-Python fallback, and verifies the outputs stay bit-identical.
"""

import argparse
import time
from array import array
from random import Random

import numpy as np

from streamcore._kernels import RELU, SIGMOID, available_backends


def rand_vec(rng, n):
    return array("d", (rng.uniform(-1.0, 1.0) for _ in range(n)))


def make_layer_state(n_out, n_in, seed):
    rng = Random(seed)
    return {
        "W": rand_vec(rng, n_out * n_in),
        "b": rand_vec(rng, n_out),
        "x": rand_vec(rng, n_in),
        "z": array("d", bytes(8 * n_out)),
        "a": array("d", bytes(8 * n_out)),
        "delta": rand_vec(rng, n_out),
        "back": array("d", bytes(8 * n_in)),
        "n_out": n_out,
        "n_in": n_in,
    }


def layer_step(mod, s):
    """One training visit to a dense layer: forward, backward, update."""
    mod.affine(s["W"], s["b"], s["x"], s["z"], s["n_out"], s["n_in"])
    mod.act_forward(s["z"], s["a"], s["n_out"], RELU)
    mod.act_backward(s["z"], s["a"], s["delta"], s["n_out"], RELU)
    mod.matvec_t(s["W"], s["delta"], s["back"], s["n_out"], s["n_in"])
    mod.sgd_update(s["W"], s["b"], s["delta"], s["x"], 1e-6,
                   s["n_out"], s["n_in"])


def make_forest_state(n_trees, depth, n_feat, seed):
    rng = np.random.default_rng(seed)
    n_internal = (1 << depth) - 1
    n_leaves = 1 << depth
    return {
        "feats": rng.integers(0, n_feat, n_trees * n_internal).astype(np.intc),
        "thrs": rng.uniform(0.0, 1.0, n_trees * n_internal),
        "ref": rng.uniform(0.0, 10.0, n_trees * n_leaves),
        "latest": np.zeros(n_trees * n_leaves),
        "x": rng.uniform(0.0, 1.0, n_feat),
        "n_trees": n_trees,
        "depth": depth,
    }


def forest_step(mod, s):
    """Score plus learn for one instance across the whole forest."""
    mod.hst_mass(s["feats"], s["thrs"], s["ref"], s["x"],
                 s["n_trees"], s["depth"])
    mod.hst_learn(s["feats"], s["thrs"], s["latest"], s["x"],
                  s["n_trees"], s["depth"])


WORKLOADS = [
    ("dense layer 64x96", layer_step, lambda: make_layer_state(64, 96, 1)),
    ("dense layer 16x8", layer_step, lambda: make_layer_state(16, 8, 2)),
    ("hst forest 25x15", forest_step, lambda: make_forest_state(25, 15, 8, 3)),
]


def run(repeats):
    backends = available_backends()
    names = sorted(backends, reverse=True)  # pure-python first, as baseline
    print(f"backends: {', '.join(names)}   repeats per workload: {repeats}\n")
    header = f"{'workload':<20}" + "".join(f"{n + ' us':>16}" for n in names)
    if len(names) > 1:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for label, step, make_state in WORKLOADS:
        per_call = {}
        final = {}
        for name in names:
            mod = backends[name]
            state = make_state()
            step(mod, state)  # warm up any lazy setup before timing
            start = time.perf_counter()
            for _ in range(repeats):
                step(mod, state)
            per_call[name] = (time.perf_counter() - start) / repeats * 1e6
            final[name] = {k: bytes(memoryview(v)) for k, v in state.items()
                           if isinstance(v, (array, np.ndarray))}
        row = f"{label:<20}" + "".join(f"{per_call[n]:>16.2f}" for n in names)
        if len(names) > 1:
            row += f"{per_call[names[0]] / per_call[names[-1]]:>9.1f}x"
        print(row)
        # identical state after `repeats` mutating calls, or the backends drifted
        baseline = final[names[0]]
        for name in names[1:]:
            assert final[name] == baseline, f"{name} diverged on {label}"

    if len(names) > 1:
        print("\nall backends produced bit-identical buffers")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=2000,
                        help="calls per workload per backend (default 2000)")
    args = parser.parse_args()
    run(args.repeats)


if __name__ == "__main__":
    main()
