"""Bit-level parity between the compiled and pure-Python kernel backends."""

import os
import subprocess
import sys
from array import array
from random import Random

import numpy as np
import pytest

from streamcore._kernels import (
    BACKEND_NAME,
    IDENTITY,
    RELU,
    SIGMOID,
    SOFTMAX,
    available_backends,
)

BACKENDS = available_backends()
KINDS = {"relu": RELU, "sigmoid": SIGMOID, "identity": IDENTITY,
         "softmax": SOFTMAX}

needs_both = pytest.mark.skipif(
    len(BACKENDS) < 2, reason="only one kernel backend importable")


def rand_vec(rng, n, lo=-1.0, hi=1.0):
    return array("d", (rng.uniform(lo, hi) for _ in range(n)))


def per_backend(fn):
    """Run fn(module) for every backend; outputs must be comparable values."""
    return {name: fn(mod) for name, mod in sorted(BACKENDS.items())}


def assert_bit_equal(by_backend):
    names = sorted(by_backend)
    ref = by_backend[names[0]]
    for name in names[1:]:
        assert by_backend[name] == ref, f"{name} diverges from {names[0]}"


def test_registry_names():
    assert "pure-python" in BACKENDS
    assert BACKEND_NAME in BACKENDS
    for name, mod in BACKENDS.items():
        assert mod.NAME == name


def test_compiled_extension_present():
    # the build is expected to produce the extension; the fallback exists
    # for import-time resilience, not as a licence to skip compiling
    assert "compiled" in BACKENDS


def test_activation_codes_agree_across_backends():
    for mod in BACKENDS.values():
        assert (mod.RELU, mod.SIGMOID, mod.IDENTITY, mod.SOFTMAX) == \
            (RELU, SIGMOID, IDENTITY, SOFTMAX)


@needs_both
@pytest.mark.parametrize("n_out,n_in", [(1, 1), (7, 5), (16, 9)])
def test_affine_parity(n_out, n_in):
    rng = Random(100 * n_out + n_in)
    W = rand_vec(rng, n_out * n_in)
    b = rand_vec(rng, n_out)
    x = rand_vec(rng, n_in)

    def run(mod):
        z = array("d", bytes(8 * n_out))
        mod.affine(array("d", W), array("d", b), array("d", x), z,
                   n_out, n_in)
        return z.tobytes()

    assert_bit_equal(per_backend(run))


@pytest.mark.parametrize("kind", KINDS.values(), ids=KINDS.keys())
@needs_both
def test_act_forward_parity(kind):
    rng = Random(kind)
    z = rand_vec(rng, 9, -30.0, 30.0)
    z[0] = 0.0  # relu boundary must route identically
    z[1] = 29.5  # near the top of the range, exercises the softmax shift

    def run(mod):
        zc = array("d", z)
        a = array("d", bytes(8 * len(z)))
        mod.act_forward(zc, a, len(z), kind)
        return a.tobytes()

    assert_bit_equal(per_backend(run))


@pytest.mark.parametrize("kind", KINDS.values(), ids=KINDS.keys())
@needs_both
def test_act_backward_parity(kind):
    rng = Random(10 + kind)
    z = rand_vec(rng, 8, -4.0, 4.0)
    z[3] = 0.0
    a = array("d", bytes(8 * len(z)))
    BACKENDS["pure-python"].act_forward(array("d", z), a, len(z), kind)
    delta = rand_vec(rng, 8)

    def run(mod):
        d = array("d", delta)
        mod.act_backward(array("d", z), array("d", a), d, len(z), kind)
        return d.tobytes()

    assert_bit_equal(per_backend(run))


@needs_both
def test_matvec_t_parity():
    rng = Random(3)
    n_out, n_in = 11, 6
    W = rand_vec(rng, n_out * n_in)
    delta = rand_vec(rng, n_out)

    def run(mod):
        out = rand_vec(Random(99), n_in)  # must be overwritten, not summed
        mod.matvec_t(array("d", W), array("d", delta), out, n_out, n_in)
        return out.tobytes()

    assert_bit_equal(per_backend(run))


@needs_both
def test_sgd_update_parity():
    rng = Random(4)
    n_out, n_in = 9, 7
    W0 = rand_vec(rng, n_out * n_in)
    b0 = rand_vec(rng, n_out)
    delta = rand_vec(rng, n_out)
    x = rand_vec(rng, n_in)

    def run(mod):
        W = array("d", W0)
        b = array("d", b0)
        mod.sgd_update(W, b, array("d", delta), array("d", x), 0.137,
                       n_out, n_in)
        return W.tobytes() + b.tobytes()

    assert_bit_equal(per_backend(run))


@needs_both
def test_two_layer_training_step_parity():
    """Forward + backward through raw kernels, in the order the network uses."""
    rng = Random(8)
    d_in, d_hid, d_out = 5, 8, 3
    W1_0, b1_0 = rand_vec(rng, d_hid * d_in), rand_vec(rng, d_hid)
    W2_0, b2_0 = rand_vec(rng, d_out * d_hid), rand_vec(rng, d_out)
    x = rand_vec(rng, d_in)

    def run(mod):
        W1, b1 = array("d", W1_0), array("d", b1_0)
        W2, b2 = array("d", W2_0), array("d", b2_0)
        z1 = array("d", bytes(8 * d_hid))
        a1 = array("d", bytes(8 * d_hid))
        mod.affine(W1, b1, x, z1, d_hid, d_in)
        mod.act_forward(z1, a1, d_hid, RELU)
        z2 = array("d", bytes(8 * d_out))
        a2 = array("d", bytes(8 * d_out))
        mod.affine(W2, b2, a1, z2, d_out, d_hid)
        mod.act_forward(z2, a2, d_out, SOFTMAX)
        # cross-entropy shortcut: output delta is prob - one_hot(target)
        delta2 = array("d", a2)
        delta2[1] -= 1.0
        delta1 = array("d", bytes(8 * d_hid))
        mod.matvec_t(W2, delta2, delta1, d_out, d_hid)
        mod.act_backward(z1, a1, delta1, d_hid, RELU)
        mod.sgd_update(W2, b2, delta2, a1, 0.05, d_out, d_hid)
        mod.sgd_update(W1, b1, delta1, x, 0.05, d_hid, d_in)
        return W1.tobytes() + b1.tobytes() + W2.tobytes() + b2.tobytes()

    assert_bit_equal(per_backend(run))


def hst_fixture(seed):
    rng = np.random.default_rng(seed)
    n_trees, depth, n_feat = 3, 4, 6
    n_internal = (1 << depth) - 1
    n_leaves = 1 << depth
    feats = rng.integers(0, n_feat, n_trees * n_internal).astype(np.intc)
    thrs = rng.uniform(0.0, 1.0, n_trees * n_internal)
    points = [rng.uniform(0.0, 1.0, n_feat) for _ in range(40)]
    # pin one coordinate exactly onto a split so the tie goes the same way
    points[0][feats[0]] = thrs[0]
    return n_trees, depth, n_leaves, feats, thrs, points


@needs_both
def test_hst_mass_parity():
    n_trees, depth, n_leaves, feats, thrs, points = hst_fixture(21)
    ref = np.random.default_rng(22).uniform(0.0, 50.0, n_trees * n_leaves)

    def run(mod):
        return [mod.hst_mass(feats.copy(), thrs.copy(), ref.copy(), x.copy(),
                             n_trees, depth) for x in points]

    assert_bit_equal(per_backend(run))


@needs_both
def test_hst_learn_parity():
    n_trees, depth, n_leaves, feats, thrs, points = hst_fixture(31)

    def run(mod):
        latest = np.zeros(n_trees * n_leaves)
        for x in points:
            mod.hst_learn(feats.copy(), thrs.copy(), latest, x.copy(),
                          n_trees, depth)
        masses = [mod.hst_mass(feats.copy(), thrs.copy(), latest, x.copy(),
                               n_trees, depth) for x in points]
        return latest.tobytes(), masses

    assert_bit_equal(per_backend(run))


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_unknown_activation_code_rejected(backend):
    mod = BACKENDS[backend]
    z = array("d", [0.5, -0.5])
    a = array("d", bytes(16))
    with pytest.raises(ValueError):
        mod.act_forward(z, a, 2, 99)
    with pytest.raises(ValueError):
        mod.act_backward(z, a, array("d", [1.0, 1.0]), 2, 99)


def backend_name_in_subprocess(extra_env):
    env = {k: v for k, v in os.environ.items() if k != "STREAMCORE_PURE"}
    env.update(extra_env)
    proc = subprocess.run(
        [sys.executable, "-c",
         "from streamcore._kernels import BACKEND_NAME; print(BACKEND_NAME)"],
        capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout.strip()


def test_env_var_forces_pure_backend():
    assert backend_name_in_subprocess({"STREAMCORE_PURE": "1"}) == "pure-python"


@needs_both
def test_default_backend_is_compiled():
    assert backend_name_in_subprocess({}) == "compiled"


@needs_both
def test_cli_output_is_backend_independent(tmp_path):
    """Same flags, either backend: byte-identical result files."""
    out = tmp_path / "run"
    argv = [sys.executable, "-m", "streamcore", "classify",
            "--model", "mlp", "--hidden", "16", "--data", "synth-abrupt",
            "--n", "1500", "--drift", "750", "--seed", "4", "--out", str(out)]
    base_env = {k: v for k, v in os.environ.items()
                if k != "STREAMCORE_PURE"}

    pure = subprocess.run(argv, capture_output=True, text=True,
                          env={**base_env, "STREAMCORE_PURE": "1"})
    assert pure.returncode == 0, pure.stderr
    assert "backend=pure-python" in pure.stdout
    pure_csv = (tmp_path / "run.csv").read_bytes()
    pure_json = (tmp_path / "run.json").read_bytes()

    compiled = subprocess.run(argv, capture_output=True, text=True,
                              env=base_env)
    assert compiled.returncode == 0, compiled.stderr
    assert "backend=compiled" in compiled.stdout
    assert (tmp_path / "run.csv").read_bytes() == pure_csv
    assert (tmp_path / "run.json").read_bytes() == pure_json
