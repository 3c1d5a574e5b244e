"""End-to-end acceptance checks, one verdict line printed per criterion.

Each test computes its verdict first, prints a single PASS/FAIL line
through the capture-disabled channel so it shows up in normal pytest
output, then asserts. Tolerances are pinned here and nowhere else.
"""

import json
import math
import statistics
import time
from array import array

import numpy as np
import pytest

from streamcore import (
    Adwin,
    DriftState,
    HoeffdingTreeClassifier,
    MLPClassifier,
    OnlineAutoencoder,
)
from streamcore.anomaly import (
    AnomalyPipeline,
    HalfSpaceTrees,
    P2Quantile,
    QuantileFilter,
    run_anomaly_pipeline,
)
from streamcore.cli import main as cli_main
from streamcore.core import StreamSource
from streamcore.datasets import (
    AbruptDriftConfig,
    BiasedFairnessConfig,
    ImbalancedAnomalyConfig,
    gen_abrupt_drift,
    gen_biased_fair,
    gen_imbalanced_anomaly,
)
from streamcore.evaluation import PrequentialConfig, prequential_run
from streamcore.fairness import SensitiveSpec
from streamcore.neural import softmax_ce_output_delta
from streamcore.preprocessing import MinMaxScaler

from test_drift import ExactWindowDetector
from test_evaluation import brute_force
from test_neural import build_net, finite_difference_check, mse_delta, mse_loss

SEEDS = (1, 2, 3, 4, 5)


def verdict(capsys, num, name, ok, detail):
    with capsys.disabled():
        state = "PASS" if ok else "FAIL"
        print(f"\nACCEPTANCE {num:2d} {name:<24} {state}  {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def anomaly_f1(detector, seed):
    stream = gen_imbalanced_anomaly(
        ImbalancedAnomalyConfig(anomaly_rate=0.01, separation=0.6, seed=seed),
        20000)
    pipeline = AnomalyPipeline(scaler=MinMaxScaler(), detector=detector,
                               filter=QuantileFilter(q=0.99, warmup=100))
    _, summary = run_anomaly_pipeline(pipeline, stream)
    return summary["f1"]


def test_c01_anomaly_detector_superiority(capsys):
    start = time.perf_counter()
    ae = [anomaly_f1(OnlineAutoencoder(latent_dim=64, lr=0.25, seed=s), s)
          for s in SEEDS]
    hst = [anomaly_f1(HalfSpaceTrees(seed=s), s) for s in SEEDS]
    elapsed = time.perf_counter() - start
    ae_med, hst_med = statistics.median(ae), statistics.median(hst)
    ok = ae_med > hst_med and ae_med >= 0.30 and elapsed <= 60.0
    verdict(capsys, 1, "anomaly superiority", ok,
            f"ae_f1_median={ae_med:.3f} hst_f1_median={hst_med:.3f} "
            f"runtime_s={elapsed:.1f}")


def test_c02_gradients_match_finite_differences(capsys):
    start = time.perf_counter()
    from streamcore._kernels import RELU, SIGMOID, SOFTMAX

    ae_net = build_net([8, 64, 8], [RELU, SIGMOID], seed=42)
    vec = array("d", np.random.default_rng(7).uniform(0.1, 0.9, 8).tolist())
    ae_worst = finite_difference_check(ae_net, vec, mse_loss, mse_delta)

    target = 1

    def ce_loss(net, v):
        out, _ = net.forward(v)
        return -math.log(out[target])

    def ce_delta(out, caches):
        return softmax_ce_output_delta(out, target)[0]

    clf_net = build_net([8, 16, 3], [RELU, SOFTMAX], seed=13)
    vec = array("d", np.random.default_rng(29).uniform(-1.0, 1.0, 8).tolist())
    clf_worst = finite_difference_check(clf_net, vec, ce_loss, ce_delta)

    elapsed = time.perf_counter() - start
    worst = max(ae_worst, clf_worst)
    ok = worst < 1e-4 and elapsed <= 5.0
    verdict(capsys, 2, "gradient oracle", ok,
            f"max_rel_err={worst:.2e} runtime_s={elapsed:.1f}")


def test_c03_metrics_match_brute_force(capsys):
    class LoggingTree(HoeffdingTreeClassifier):
        def __init__(self):
            super().__init__()
            self.preds = []

        def predict_one(self, x):
            y = super().predict_one(x)
            self.preds.append(y)
            return y

    truths = []

    def observed(stream):
        for x, y in stream:
            truths.append(y)
            yield x, y

    model = LoggingTree()
    cfg = PrequentialConfig(metrics=("accuracy", "cohen_kappa", "f1"),
                            positive_label=1)
    stream = gen_abrupt_drift(AbruptDriftConfig(seed=11, noise=0.2), 10000)
    _, summary = prequential_run(model, observed(stream), cfg)

    acc, kappa, f1 = brute_force(list(zip(truths, model.preds)), positive=1)
    gap = max(abs(summary["accuracy"] - acc),
              abs(summary["cohen_kappa"] - kappa),
              abs(summary["f1"] - f1))
    ok = gap <= 1e-12 and len(truths) == 10000
    verdict(capsys, 3, "metric oracle", ok, f"n=10000 max_abs_gap={gap:.1e}")


def test_c04_adwin_behavior(capsys):
    # literal mean-shift stream, plus seeded 5%-noise variants of it
    def first_fire(values):
        det = Adwin(delta_change=0.002)
        for i, v in enumerate(values):
            if det.update(v) is DriftState.CHANGE and i >= 1000:
                return i
        return None

    literal_at = first_fire([0.0] * 1000 + [1.0] * 1000)
    hits = 0
    for s in SEEDS:
        rng = np.random.default_rng(s)
        noisy = [float(rng.random() < 0.05) for _ in range(1000)] + \
                [float(rng.random() < 0.95) for _ in range(1000)]
        at = first_fire(noisy)
        hits += at is not None and at - 1000 < 300

    false_changes = 0
    for s in SEEDS:
        rng = np.random.default_rng(100 + s)
        det = Adwin(delta_change=0.002)
        for _ in range(10000):
            if det.update(float(rng.random() < 0.5)) is DriftState.CHANGE:
                false_changes += 1

    mismatches = 0
    rng = np.random.default_rng(12)
    for values in ([0.0] * 256 + [1.0] * 256,
                   [0.25, 0.75] * 256,
                   [float(v) for v in rng.random(512)]):
        det = Adwin(delta_change=0.002, max_buckets=512)
        oracle = ExactWindowDetector(delta_change=0.002)
        for v in values:
            got = det.update(v) is DriftState.CHANGE
            if got != oracle.update(v) or det.total_count != len(oracle.values):
                mismatches += 1

    ok = (literal_at is not None and literal_at - 1000 < 300
          and hits >= 4 and false_changes <= 1 and mismatches == 0)
    verdict(capsys, 4, "drift detector", ok,
            f"shift_fire_at={literal_at} noisy_hits={hits}/5 "
            f"false_changes={false_changes} oracle_mismatches={mismatches}")


def test_c05_tree_learns_separable_concept(capsys):
    accs, caps_ok = [], True
    for s in SEEDS:
        rng = np.random.default_rng(s)

        def stream():
            for _ in range(5000):
                a = float(rng.random())
                yield {"a": a, "b": float(rng.random())}, int(a > 0.5)

        model = HoeffdingTreeClassifier()
        _, summary = prequential_run(model, stream())
        accs.append(summary["accuracy"])
        caps_ok = caps_ok and model.node_count <= model.max_node_count
    ok = min(accs) >= 0.95 and caps_ok
    verdict(capsys, 5, "tree accuracy", ok,
            f"min_accuracy={min(accs):.4f} node_caps_held={caps_ok}")


def test_c06_fair_tree_reduces_parity_gap(capsys):
    spec = SensitiveSpec("group", "dep", "fav", 1)
    fair_sp, plain_sp = [], []
    for s in SEEDS:
        cfg = BiasedFairnessConfig(suppression=0.5, seed=s)
        _, fair = prequential_run(HoeffdingTreeClassifier(fairness=spec),
                                  gen_biased_fair(cfg, 10000), fairness=spec)
        _, plain = prequential_run(HoeffdingTreeClassifier(),
                                   gen_biased_fair(cfg, 10000), fairness=spec)
        fair_sp.append(fair["statistical_parity"])
        plain_sp.append(plain["statistical_parity"])
    fair_med = statistics.median(fair_sp)
    plain_med = statistics.median(plain_sp)
    ok = fair_med <= plain_med
    verdict(capsys, 6, "fairness direction", ok,
            f"fair_sp_median={fair_med:.4f} plain_sp_median={plain_med:.4f}")


def test_c07_shallow_mlp_starts_faster(capsys):
    cfg_eval = PrequentialConfig(stride=100, rolling_window=1000)
    shallow, deep = [], []
    for s in SEEDS:
        for widths, bucket in (((64,), shallow), ((64, 64), deep)):
            cfg = AbruptDriftConfig(seed=s, drift_positions=(5000,))
            records, _ = prequential_run(
                MLPClassifier(hidden=widths, seed=s),
                gen_abrupt_drift(cfg, 10000), cfg_eval)
            early = next(r for r in records if r["step"] == 1000)
            bucket.append(early["rolling_accuracy"])
    sh_med, dp_med = statistics.median(shallow), statistics.median(deep)
    ok = sh_med > dp_med
    verdict(capsys, 7, "depth effect", ok,
            f"one_layer_median={sh_med:.3f} two_layer_median={dp_med:.3f} "
            f"(accuracy over steps 1-1000)")


def test_c08_quantile_estimator_accuracy(capsys):
    worst = 0.0
    for s in SEEDS:
        values = np.random.default_rng(s).random(10000)
        for q in (0.5, 0.9, 0.99):
            est = P2Quantile(q)
            for v in values:
                est.update(float(v))
            worst = max(worst,
                        abs(est.estimate() - float(np.quantile(values, q))))
    ok = worst < 0.05
    verdict(capsys, 8, "quantile estimator", ok, f"worst_abs_err={worst:.4f}")


def test_c09_streaming_contract(capsys):
    x = {"a": 0.3, "b": 0.7}
    fresh_ok = True
    try:
        HoeffdingTreeClassifier().predict_one(x)
        HoeffdingTreeClassifier(
            fairness=SensitiveSpec("a", 0.3, 0.7, 1)).predict_one(x)
        MLPClassifier().predict_one(x)
        float(OnlineAutoencoder().score_one(x))
        float(HalfSpaceTrees().score_one(x))
    except Exception:
        fresh_ok = False

    source = gen_abrupt_drift(AbruptDriftConfig(seed=2), 50000)
    for _ in source:
        pass
    single_ok = source.consumed == 50000 and list(source) == []

    det = Adwin()
    rng = np.random.default_rng(7)
    for _ in range(50000):
        det.update(float(rng.random() < 0.5))
    log_bound = 6 * math.ceil(math.log2(max(2.0, det.total_count / 5)) + 1)
    adwin_ok = det.bucket_count() <= log_bound

    hst = HalfSpaceTrees(n_trees=5, depth=8, window_size=100, seed=1)
    hst.learn_one(x)
    first = hst.memory_estimate()
    rng = np.random.default_rng(8)
    for _ in range(49999):
        hst.learn_one({"a": float(rng.random()), "b": float(rng.random())})
    hst_ok = hst.memory_estimate() == first

    tree = HoeffdingTreeClassifier(max_node_count=64)
    for xx, yy in gen_abrupt_drift(AbruptDriftConfig(seed=3, noise=0.3), 50000):
        tree.learn_one(xx, yy)
    tree_ok = tree.node_count <= 64

    ok = fresh_ok and single_ok and adwin_ok and hst_ok and tree_ok
    verdict(capsys, 9, "streaming contract", ok,
            f"fresh_predict={fresh_ok} single_pass={single_ok} "
            f"adwin_buckets={det.bucket_count()}<= {log_bound} "
            f"hst_constant={hst_ok} tree_nodes={tree.node_count}<=64")


def test_c10_cli_determinism(capsys, tmp_path):
    def double_run(argv, stem):
        assert cli_main(argv) == 0
        snap = [(tmp_path / n).read_bytes()
                for n in (f"{stem}.csv", f"{stem}.json")]
        assert cli_main(argv) == 0
        return snap == [(tmp_path / n).read_bytes()
                        for n in (f"{stem}.csv", f"{stem}.json")]

    classify_same = double_run(
        ["classify", "--model", "mlp", "--hidden", "16",
         "--data", "synth-abrupt", "--n", "2000", "--drift", "1000",
         "--seed", "4", "--out", str(tmp_path / "c")], "c")
    anomaly_same = double_run(
        ["anomaly", "--model", "autoencoder", "--latent", "16",
         "--data", "synth-fraud", "--n", "1200", "--seed", "3",
         "--out", str(tmp_path / "a")], "a")
    ok = classify_same and anomaly_same
    verdict(capsys, 10, "cli determinism", ok,
            f"classify_identical={classify_same} "
            f"anomaly_identical={anomaly_same}")
