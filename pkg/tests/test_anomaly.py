"""Half-space forest, running-quantile filter, and the composed pipeline."""

import math

import numpy as np
import pytest

from streamcore import (AnomalyPipeline, HalfSpaceTrees, MinMaxScaler,
                        OnlineAutoencoder, QuantileFilter,
                        run_anomaly_pipeline)
from streamcore.anomaly import P2Quantile
from streamcore.core import ContractError
from streamcore.datasets import ImbalancedAnomalyConfig, gen_imbalanced_anomaly


def uniform_instance(rng, d=4):
    return {f"f{j}": float(v) for j, v in enumerate(rng.uniform(0, 1, d))}


# ---------------------------------------------------------------- quantile

def test_p2_exact_at_small_counts():
    est = P2Quantile(0.5)
    for v in (1.0, 2.0, 3.0, 4.0, 5.0):
        est.update(v)
    assert est.estimate() == 3.0


def test_p2_tracks_uniform_tail():
    est = P2Quantile(0.99)
    rng = np.random.default_rng(0)
    values = rng.uniform(0, 1, 10_000)
    for v in values:
        est.update(float(v))
    exact = float(np.quantile(values, 0.99))
    assert abs(est.estimate() - exact) <= 0.02
    assert abs(est.estimate() - 0.99) <= 0.02


@pytest.mark.parametrize("q", [0.5, 0.9, 0.99])
def test_p2_convergence_across_quantiles(q):
    est = P2Quantile(q)
    rng = np.random.default_rng(int(q * 100))
    values = rng.uniform(0, 1, 10_000)
    for v in values:
        est.update(float(v))
    assert abs(est.estimate() - float(np.quantile(values, q))) < 0.05


def test_p2_constant_stream_returns_the_constant():
    est = P2Quantile(0.99)
    for _ in range(500):
        est.update(7.25)
    assert est.estimate() == 7.25


def test_p2_marker_heights_stay_sorted():
    est = P2Quantile(0.9)
    rng = np.random.default_rng(3)
    for v in rng.normal(0, 5, 2000):
        est.update(float(v))
        if est.n_seen >= 5:
            h = est._heights
            assert all(a <= b for a, b in zip(h, h[1:]))


def test_p2_rejects_bad_input():
    with pytest.raises(ValueError):
        P2Quantile(0.0)
    with pytest.raises(ValueError):
        P2Quantile(1.0)
    est = P2Quantile(0.5)
    with pytest.raises(ValueError):
        est.update(float("nan"))


def test_p2_empty_and_partial():
    est = P2Quantile(0.5)
    assert est.estimate() == 0.0
    est.update(10.0)
    est.update(2.0)
    est.update(6.0)
    # exact while fewer than five values: sorted pick
    assert est.estimate() == 6.0


# ------------------------------------------------------------------ filter

def test_filter_warmup_forces_normal():
    filt = QuantileFilter(q=0.99, warmup=100)
    for i in range(101):
        verdict = filt.classify(1e9)
        assert verdict.is_anomaly is False
        filt.update(float(i % 7))
    # strictly past warmup a huge score is flagged
    assert filt.classify(1e9).is_anomaly is True


def test_filter_classify_does_not_mutate():
    filt = QuantileFilter(q=0.9, warmup=0)
    for v in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6):
        filt.update(v)
    seen, estimate = filt.n_seen, filt.estimate()
    for _ in range(10):
        filt.classify(99.0)
    assert (filt.n_seen, filt.estimate()) == (seen, estimate)


def test_filter_verdict_matches_threshold_rule():
    filt = QuantileFilter(q=0.5, warmup=5)
    rng = np.random.default_rng(11)
    for v in rng.uniform(0, 1, 300):
        score = float(v)
        verdict = filt.classify(score)
        expected = filt.n_seen > 5 and score > filt.estimate()
        assert verdict.is_anomaly == expected
        assert verdict.threshold == filt.estimate()
        filt.update(score)


def test_filter_score_below_estimate_is_normal():
    filt = QuantileFilter(q=0.5, warmup=0)
    for v in (1.0, 2.0, 3.0, 4.0, 5.0):
        filt.update(v)
    assert filt.classify(2.0).is_anomaly is False


def test_filter_without_detector_refuses_delegation():
    filt = QuantileFilter()
    with pytest.raises(ContractError):
        filt.score_one({"a": 1.0})
    with pytest.raises(ContractError):
        filt.learn_one({"a": 1.0})


def test_filter_wrapping_detector_scores_before_training():
    inner = HalfSpaceTrees(n_trees=3, depth=4, window_size=10, seed=0)
    filt = QuantileFilter(detector=inner, q=0.9, warmup=0)
    x = {"a": 0.5, "b": 0.5}
    filt.learn_one(x)
    # the recorded score predates training: fresh detector scores 1.0
    assert filt.n_seen == 1
    assert filt.estimate() == 1.0
    assert filt.score_one(x) == inner.score_one(x)


# --------------------------------------------------------------- detector

def test_hst_fresh_scores_maximal():
    det = HalfSpaceTrees()
    assert det.score_one({"a": 0.3}) == 1.0


def test_hst_node_count_formula():
    det = HalfSpaceTrees(n_trees=25, depth=15)
    assert det.node_count == 25 * (2 ** 16 - 1)
    assert HalfSpaceTrees(n_trees=3, depth=2).node_count == 3 * 7


def test_hst_single_learn_single_leaf_mass():
    det = HalfSpaceTrees(n_trees=5, depth=6, window_size=100, seed=1)
    det.learn_one({"a": 0.2, "b": 0.9})
    reference, latest = det.leaf_mass_totals()
    assert reference == 0.0
    assert latest == 5.0


def test_hst_window_roll():
    det = HalfSpaceTrees(n_trees=4, depth=5, window_size=250, seed=2)
    rng = np.random.default_rng(2)
    for _ in range(249):
        det.learn_one(uniform_instance(rng))
    assert det.leaf_mass_totals() == (0.0, 4.0 * 249)
    det.learn_one(uniform_instance(rng))
    assert det.leaf_mass_totals() == (4.0 * 250, 0.0)


def test_hst_masses_never_negative():
    det = HalfSpaceTrees(n_trees=3, depth=4, window_size=7, seed=5)
    rng = np.random.default_rng(5)
    for _ in range(100):
        det.learn_one(uniform_instance(rng))
        reference, latest = det.leaf_mass_totals()
        assert reference >= 0.0 and latest >= 0.0


def test_hst_dense_region_scores_lower_than_far_point():
    det = HalfSpaceTrees(n_trees=25, depth=6, window_size=250, seed=0)
    home = {"a": 0.3, "b": 0.7}
    for _ in range(1000):
        det.learn_one(home)
    far = {"a": 0.97, "b": 0.02}
    assert det.score_one(home) < det.score_one(far)


def test_hst_scores_bounded_on_random_inputs():
    det = HalfSpaceTrees(n_trees=10, depth=8, window_size=50, seed=9)
    rng = np.random.default_rng(9)
    for _ in range(300):
        x = uniform_instance(rng)
        s = det.score_one(x)
        assert 0.0 <= s <= 1.0 and math.isfinite(s)
        det.learn_one(x)


def test_hst_memory_constant_after_construction():
    det = HalfSpaceTrees(n_trees=5, depth=10, window_size=25, seed=4)
    rng = np.random.default_rng(4)
    det.learn_one(uniform_instance(rng))
    built = det.memory_estimate()
    for _ in range(2000):
        det.learn_one(uniform_instance(rng))
    assert det.memory_estimate() == built


def test_hst_rejects_bad_construction():
    with pytest.raises(ValueError):
        HalfSpaceTrees(n_trees=0)
    with pytest.raises(ValueError):
        HalfSpaceTrees(depth=0)
    with pytest.raises(ValueError):
        HalfSpaceTrees(window_size=0)
    det = HalfSpaceTrees()
    with pytest.raises(ValueError):
        det.learn_one({"label": "only-categorical"})


# --------------------------------------------------------------- pipeline

def fresh_pipeline(seed=0):
    return AnomalyPipeline(
        scaler=MinMaxScaler(),
        detector=HalfSpaceTrees(n_trees=5, depth=5, window_size=50, seed=seed),
        filter=QuantileFilter(q=0.99, warmup=100),
    )


def test_pipeline_record_count_matches_stream():
    stream = gen_imbalanced_anomaly(
        ImbalancedAnomalyConfig(n_features=4, seed=0), 400)
    records, summary = run_anomaly_pipeline(fresh_pipeline(), stream)
    assert len(records) == 400
    assert summary["n"] == 400
    assert [r.step for r in records[:3]] == [1, 2, 3]


def test_pipeline_zero_anomaly_stream_scores_zero():
    rng = np.random.default_rng(6)
    stream = [(uniform_instance(rng), False) for _ in range(300)]
    _, summary = run_anomaly_pipeline(fresh_pipeline(), stream)
    assert summary["anomalies"] == 0
    assert summary["recall"] == 0.0
    assert summary["f1"] == 0.0


def test_pipeline_verdicts_predate_learning():
    config = ImbalancedAnomalyConfig(n_features=4, seed=3)
    records, _ = run_anomaly_pipeline(
        fresh_pipeline(seed=3), gen_imbalanced_anomaly(config, 200))
    # replay: a twin trained on the first k instances only must reproduce
    # the k-th verdict, so instance k never influences its own score
    for k in (0, 1, 57, 199):
        twin = fresh_pipeline(seed=3)
        replay = list(gen_imbalanced_anomaly(config, k + 1))
        for x, _ in replay[:k]:
            scaled = twin.scaler.transform_one(x)
            score = twin.detector.score_one(scaled)
            twin.filter.update(score)
            twin.scaler.learn_one(x)
            twin.detector.learn_one(twin.scaler.transform_one(x))
        x, _ = replay[k]
        score = twin.detector.score_one(twin.scaler.transform_one(x))
        assert score == records[k].score
        assert twin.filter.classify(score).is_anomaly == records[k].is_anomaly


def test_pipeline_summary_counts_are_consistent():
    stream = gen_imbalanced_anomaly(
        ImbalancedAnomalyConfig(n_features=8, seed=1), 1500)
    records, summary = run_anomaly_pipeline(fresh_pipeline(seed=1), stream)
    assert summary["flagged"] == sum(r.is_anomaly for r in records)
    assert summary["anomalies"] == sum(r.truth for r in records)
    assert summary["true_positives"] == sum(
        r.is_anomaly and r.truth for r in records)


def test_pipeline_flagged_fraction_near_tail_rate():
    config = ImbalancedAnomalyConfig(seed=4)
    pipeline = AnomalyPipeline(
        scaler=MinMaxScaler(),
        detector=OnlineAutoencoder(latent_dim=64, lr=0.25, seed=4),
        filter=QuantileFilter(q=0.99, warmup=100),
    )
    records, _ = run_anomaly_pipeline(
        pipeline, gen_imbalanced_anomaly(config, 20_000))
    fraction = sum(r.is_anomaly for r in records) / len(records)
    assert 0.005 <= fraction <= 0.02
