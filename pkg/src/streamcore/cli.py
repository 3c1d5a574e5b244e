"""Command-line harness for reproducible streaming runs.

Subcommands build a (data, model, evaluation) triple from flags, run it,
and write plot-ready outputs: a CSV time series plus a JSON summary that
embeds the fully resolved configuration. Output files contain only
deterministic content; wall-clock readings go to stdout so identical
invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from . import __version__
from ._kernels import BACKEND_NAME
from .anomaly import (AnomalyPipeline, HalfSpaceTrees, QuantileFilter,
                      run_anomaly_pipeline)
from .core import ClassLabel, Instance, StreamSource
from .datasets import (AbruptDriftConfig, BiasedFairnessConfig,
                       CsvStreamConfig, ImbalancedAnomalyConfig,
                       gen_abrupt_drift, gen_biased_fair,
                       gen_imbalanced_anomaly, read_csv_stream)
from .evaluation import PrequentialConfig, RunAborted, prequential_run
from .fairness import CSmoteOversampler, SensitiveSpec
from .neural import MLPClassifier, OnlineAutoencoder
from .preprocessing import MinMaxScaler
from .tree import HoeffdingTreeClassifier

SYNTHETIC_SOURCES = ("synth-abrupt", "synth-fraud", "synth-fair")
CLASSIFY_MODELS = ("mlp", "ht", "ht-fair", "ht-csmote")
ANOMALY_MODELS = ("autoencoder", "hst")
_TIME_COLUMNS = ("learn_time_ns", "predict_time_ns")


class CliError(Exception):
    """Configuration or IO problem reported as a message plus exit 1."""


@dataclass(frozen=True)
class RunSpec:
    """Fully resolved description of one run, echoed into every summary."""

    task: str
    model: str
    data: str
    n: int
    seed: int | None
    stride: int
    hidden: tuple[int, ...]
    latent: int
    lr: float
    q: float
    window: int
    delta_change: float
    delta_warning: float
    sensitive: str | None
    out: str
    label: str | None = None
    noise: float = 0.0
    drift: tuple[int, ...] = ()
    rate: float = 0.01
    separation: float = 0.6
    suppression: float = 0.5

    def config_dict(self) -> dict:
        resolved = asdict(self)
        resolved["hidden"] = list(self.hidden)
        resolved["drift"] = list(self.drift)
        return resolved


def _parse_int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part != "")
    except ValueError:
        raise CliError(f"{flag} expects comma-separated integers, "
                       f"got {text!r}") from None
    if not values:
        raise CliError(f"{flag} must list at least one integer")
    return values


def _parse_sensitive(text: str) -> SensitiveSpec:
    head, sep, tail = text.partition("=")
    parts = tail.split(":")
    if not sep or len(parts) != 3 or not head:
        raise CliError("--sensitive expects feature=deprived:favored:positive")
    positive: ClassLabel = parts[2]
    for cast in (int, float):
        try:
            positive = cast(parts[2])
            break
        except ValueError:
            continue
    return SensitiveSpec(feature=head, deprived=parts[0], favored=parts[1],
                         positive=positive)


def _build_stream(spec: RunSpec) -> StreamSource:
    if spec.data == "synth-abrupt":
        cfg = AbruptDriftConfig(drift_positions=spec.drift, noise=spec.noise,
                                seed=spec.seed)
        return gen_abrupt_drift(cfg, spec.n)
    if spec.data == "synth-fraud":
        cfg = ImbalancedAnomalyConfig(anomaly_rate=spec.rate,
                                      separation=spec.separation,
                                      seed=spec.seed)
        return gen_imbalanced_anomaly(cfg, spec.n)
    if spec.data == "synth-fair":
        cfg = BiasedFairnessConfig(suppression=spec.suppression,
                                   seed=spec.seed)
        return gen_biased_fair(cfg, spec.n)
    if spec.label is None:
        raise CliError("--label is required for CSV data sources")
    try:
        return read_csv_stream(CsvStreamConfig(path=spec.data,
                                               label=spec.label))
    except OSError as exc:
        raise CliError(f"cannot open {spec.data}: {exc}") from None


def _resolve_sensitive(spec: RunSpec) -> SensitiveSpec | None:
    if spec.sensitive is not None:
        return _parse_sensitive(spec.sensitive)
    if spec.data == "synth-fair":
        return SensitiveSpec(feature="group", deprived="dep", favored="fav",
                             positive=1)
    return None


class _CsmoteClassifier:
    """Hoeffding tree fed through C-SMOTE minority rebalancing."""

    def __init__(self, delta_change: float, delta_warning: float, seed: int):
        self.tree = HoeffdingTreeClassifier()
        self.oversampler = CSmoteOversampler(seed=seed,
                                             delta_change=delta_change,
                                             delta_warning=delta_warning)

    def learn_one(self, x: Instance, y: ClassLabel, w: float = 1.0) -> None:
        self.oversampler.step(x, y, self.tree.learn_one)

    def predict_one(self, x: Instance):
        return self.tree.predict_one(x)

    def predict_proba_one(self, x: Instance):
        return self.tree.predict_proba_one(x)

    def memory_estimate(self) -> int:
        return self.tree.memory_estimate() + self.oversampler.memory_estimate()


def _build_classifier(spec: RunSpec, sensitive: SensitiveSpec | None):
    seed = spec.seed if spec.seed is not None else 0
    if spec.model == "mlp":
        return MLPClassifier(hidden=spec.hidden, lr=spec.lr, seed=seed)
    if spec.model == "ht":
        return HoeffdingTreeClassifier()
    if spec.model == "ht-fair":
        if sensitive is None:
            raise CliError("--model ht-fair requires --sensitive "
                           "(or a data source with a known sensitive feature)")
        return HoeffdingTreeClassifier(fairness=sensitive)
    if spec.model == "ht-csmote":
        return _CsmoteClassifier(spec.delta_change, spec.delta_warning, seed)
    raise CliError(f"unknown classify model {spec.model!r}; "
                   f"choose from {', '.join(CLASSIFY_MODELS)}")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".streamcore-")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except Exception:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_records_csv(path: str, records: list[dict],
                       columns: list[str]) -> None:
    lines = [",".join(columns)]
    for record in records:
        lines.append(",".join(_format_cell(record[c]) for c in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_summary_json(path: str, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _record_columns(records: list[dict]) -> list[str]:
    if not records:
        return ["step"]
    return [c for c in records[0] if c not in _TIME_COLUMNS]


def cmd_classify(spec: RunSpec) -> int:
    sensitive = _resolve_sensitive(spec)
    if spec.task == "fairness" and sensitive is None:
        raise CliError("fairness task requires --sensitive "
                       "(or a data source with a known sensitive feature)")
    model = _build_classifier(spec, sensitive)
    stream = _build_stream(spec)
    track = (sensitive if spec.task == "fairness" or spec.model == "ht-fair"
             or spec.sensitive else None)
    config = PrequentialConfig(stride=spec.stride,
                               rolling_window=spec.window)
    csv_path = f"{spec.out}.csv"
    json_path = f"{spec.out}.json"
    started = time.perf_counter()
    try:
        records, summary = prequential_run(model, stream, config,
                                           fairness=track)
    except RunAborted as aborted:
        _write_records_csv(csv_path, aborted.records,
                           _record_columns(aborted.records))
        cause = aborted.__cause__ or aborted.__context__
        print(f"error: run aborted after {aborted.summary.get('n', 0)} "
              f"steps: {cause}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - started
    _write_records_csv(csv_path, records, _record_columns(records))
    payload = {"command": spec.task, "version": __version__,
               "config": spec.config_dict(), "summary": _scrub(summary)}
    _write_summary_json(json_path, payload)
    print(f"{spec.task} model={spec.model} n={summary['n']} "
          f"accuracy={summary['accuracy']:.4f} backend={BACKEND_NAME} "
          f"runtime_s={elapsed:.3f}")
    return 0


def _scrub(summary: dict) -> dict:
    return {k: v for k, v in summary.items() if k not in _TIME_COLUMNS}


def _build_anomaly_pipeline(model: str, spec: RunSpec) -> AnomalyPipeline:
    seed = spec.seed if spec.seed is not None else 0
    if model == "autoencoder":
        detector = OnlineAutoencoder(latent_dim=spec.latent, lr=spec.lr,
                                     seed=seed)
    elif model == "hst":
        detector = HalfSpaceTrees(window_size=spec.window, seed=seed)
    else:
        raise CliError(f"unknown anomaly model {model!r}; "
                       f"choose from {', '.join(ANOMALY_MODELS)}")
    return AnomalyPipeline(scaler=MinMaxScaler(),
                           detector=detector,
                           filter=QuantileFilter(q=spec.q))


def cmd_anomaly(spec: RunSpec) -> int:
    models = [part for part in spec.model.split(",") if part]
    if not models:
        raise CliError("--model must name at least one anomaly model")
    summaries: dict[str, dict] = {}
    started = time.perf_counter()
    for name in models:
        pipeline = _build_anomaly_pipeline(name, spec)
        stream = _build_stream(spec)
        records, summary = run_anomaly_pipeline(pipeline, stream)
        suffix = f".{name}" if len(models) > 1 else ""
        rows = [{"step": r.step, "score": r.score, "threshold": r.threshold,
                 "verdict": int(r.is_anomaly), "truth": int(bool(r.truth))}
                for r in records]
        _write_records_csv(f"{spec.out}{suffix}.csv", rows,
                           ["step", "score", "threshold", "verdict", "truth"])
        summaries[name] = summary
    elapsed = time.perf_counter() - started
    payload = {"command": "anomaly", "version": __version__,
               "config": spec.config_dict()}
    if len(models) == 1:
        payload["summary"] = summaries[models[0]]
    else:
        payload["models"] = summaries
        payload["f1_ranking"] = sorted(
            summaries, key=lambda m: (-summaries[m]["f1"], m))
    _write_summary_json(f"{spec.out}.json", payload)
    shown = " ".join(f"{m}:f1={summaries[m]['f1']:.4f}" for m in models)
    print(f"anomaly {shown} backend={BACKEND_NAME} runtime_s={elapsed:.3f}")
    return 0


@dataclass
class _CompareResult:
    architecture: str
    row: dict = field(default_factory=dict)
    runtime_s: float = 0.0
    error: str | None = None


def _compare_worker(spec: RunSpec, hidden: tuple[int, ...]) -> _CompareResult:
    label = "x".join(str(h) for h in hidden)
    result = _CompareResult(architecture=label)
    started = time.perf_counter()
    try:
        model = MLPClassifier(hidden=hidden, lr=spec.lr,
                              seed=spec.seed if spec.seed is not None else 0)
        stream = _build_stream(spec)
        config = PrequentialConfig(stride=spec.stride,
                                   rolling_window=spec.window)
        records, summary = prequential_run(model, stream, config)
        rolling = [r["rolling_accuracy"] for r in records]
        result.row = {
            "architecture": label,
            "hidden": list(hidden),
            "mean_rolling_accuracy": (sum(rolling) / len(rolling)
                                      if rolling else 0.0),
            "final_accuracy": summary["accuracy"],
            "memory_bytes": summary["memory_bytes"],
        }
    except Exception as exc:  # per-run isolation: other runs proceed
        result.error = f"{type(exc).__name__}: {exc}"
        result.row = {"architecture": label, "hidden": list(hidden),
                      "error": result.error}
    result.runtime_s = time.perf_counter() - started
    return result


def _max_workers(n_runs: int) -> int:
    raw = os.environ.get("STREAMCORE_THREADS", "")
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise CliError(f"STREAMCORE_THREADS must be an integer, "
                           f"got {raw!r}") from None
        if cap < 1:
            raise CliError("STREAMCORE_THREADS must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_runs))


def cmd_compare(spec: RunSpec, widths: tuple[int, ...],
                depths: tuple[int, ...]) -> int:
    grid = [(w,) * d for d in depths for w in widths]
    if len(grid) < 2:
        raise CliError("compare needs a grid of at least 2 architectures "
                       "(--widths and --depths)")
    with ThreadPoolExecutor(max_workers=_max_workers(len(grid))) as pool:
        futures = [pool.submit(_compare_worker, spec, hidden)
                   for hidden in grid]
        results = [f.result() for f in futures]
    payload = {"command": "compare", "version": __version__,
               "config": {**spec.config_dict(), "widths": list(widths),
                          "depths": list(depths)},
               "runs": [r.row for r in results]}
    _write_summary_json(f"{spec.out}.json", payload)
    print(f"{'architecture':>14} {'mean_roll_acc':>14} {'runtime_s':>10} "
          f"{'memory_bytes':>13}")
    for r in results:
        if r.error:
            print(f"{r.architecture:>14} {'failed':>14} {r.runtime_s:>10.3f} "
                  f"- {r.error}")
        else:
            print(f"{r.architecture:>14} "
                  f"{r.row['mean_rolling_accuracy']:>14.4f} "
                  f"{r.runtime_s:>10.3f} {r.row['memory_bytes']:>13}")
    failures = [r for r in results if r.error]
    if failures:
        print(f"{len(failures)} of {len(results)} runs failed",
              file=sys.stderr)
        return 1
    return 0


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", required=True)
    parser.add_argument("--data", required=True)
    parser.add_argument("--n", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--stride", type=int, default=100)
    parser.add_argument("--hidden", default="64")
    parser.add_argument("--latent", type=int, default=64)
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--q", type=float, default=0.99)
    parser.add_argument("--window", type=int, default=None)
    parser.add_argument("--delta-change", type=float, default=0.002)
    parser.add_argument("--delta-warning", type=float, default=0.01)
    parser.add_argument("--sensitive", default=None)
    parser.add_argument("--out", default="streamcore-run")
    parser.add_argument("--label", default=None)
    parser.add_argument("--noise", type=float, default=0.0)
    parser.add_argument("--drift", default="")
    parser.add_argument("--rate", type=float, default=0.01)
    parser.add_argument("--separation", type=float, default=0.6)
    parser.add_argument("--suppression", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamcore",
        description="Streaming learners, drift detectors, and evaluation "
                    "harness with reproducible synthetic benchmarks.")
    parser.add_argument("--version", action="version",
                        version=f"streamcore {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    classify = subs.add_parser(
        "classify", help="prequential classification run")
    _add_common_flags(classify)
    anomaly = subs.add_parser(
        "anomaly", help="anomaly pipeline run (comma-join models to compare)")
    _add_common_flags(anomaly)
    fairness = subs.add_parser(
        "fairness", help="classification run with parity tracking forced on")
    _add_common_flags(fairness)
    compare = subs.add_parser(
        "compare", help="MLP width/depth grid on one stream")
    _add_common_flags(compare)
    compare.add_argument("--widths", default="16,64")
    compare.add_argument("--depths", default="1,2")
    return parser


def _spec_from_args(args: argparse.Namespace, task: str) -> RunSpec:
    if args.data in SYNTHETIC_SOURCES and args.seed is None:
        raise CliError("--seed is required for synthetic data sources")
    if args.n < 0:
        raise CliError("--n must be >= 0")
    default_window = {"classify": 500, "compare": 500, "anomaly": 250,
                      "fairness": 500}[task]
    lr = args.lr
    if lr is None:
        lr = 0.25 if (task == "anomaly" and "autoencoder"
                      in args.model.split(",")) else 0.05
    if not math.isfinite(lr) or lr <= 0:
        raise CliError("--lr must be a positive finite number")
    return RunSpec(
        task=task, model=args.model, data=args.data, n=args.n,
        seed=args.seed, stride=args.stride,
        hidden=_parse_int_list(args.hidden, "--hidden"),
        latent=args.latent, lr=lr, q=args.q,
        window=args.window if args.window is not None else default_window,
        delta_change=args.delta_change, delta_warning=args.delta_warning,
        sensitive=args.sensitive, out=args.out, label=args.label,
        noise=args.noise,
        drift=_parse_int_list(args.drift, "--drift") if args.drift else (),
        rate=args.rate, separation=args.separation,
        suppression=args.suppression)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _spec_from_args(args, args.command)
        if args.command in ("classify", "fairness"):
            return cmd_classify(spec)
        if args.command == "anomaly":
            return cmd_anomaly(spec)
        return cmd_compare(spec,
                           widths=_parse_int_list(args.widths, "--widths"),
                           depths=_parse_int_list(args.depths, "--depths"))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
