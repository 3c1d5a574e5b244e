"""Incremental machine learning on instance streams.

Learners consume one ``dict`` instance at a time under a test-then-train
discipline, with bounded memory and anytime predictions. Hot numeric
kernels run through a compiled extension when available and fall back to
pure Python otherwise; both backends produce bit-identical results.
"""

from ._kernels import BACKEND_NAME, available_backends
from .anomaly import (AnomalyPipeline, AnomalyRecord, AnomalyVerdict,
                      HalfSpaceTrees, P2Quantile, QuantileFilter,
                      run_anomaly_pipeline)
from .core import (AnomalyScorer, Classifier, ContractError, Estimator,
                   EstimatorContract, Instance, Pipeline, StreamSource,
                   Transformer, UNKNOWN_CLASS, check_distribution,
                   check_instance, stream_from_iterator)
from .datasets import (AbruptDriftConfig, BiasedFairnessConfig,
                       CsvStreamConfig, ImbalancedAnomalyConfig,
                       gen_abrupt_drift, gen_biased_fair,
                       gen_imbalanced_anomaly, read_csv_stream)
from .drift import Adwin, DriftState, Eddm
from .evaluation import (ConfusionCounts, PrequentialConfig, ResourceTracker,
                         RollingWindow, RunAborted, accuracy, cohen_kappa,
                         f1_binary, prequential_run)
from .fairness import (CSmoteOversampler, CumulativeFairnessTracker,
                       JointFrequencyTable, SensitiveSpec, massage_chunk,
                       reweight_instance, smote_interpolate)
from .neural import (DenseLayer, DenseNetwork, FeatureVectorizer,
                     MLPClassifier, OnlineAutoencoder)
from .preprocessing import MinMaxScaler, StandardScaler
from .tree import (HoeffdingTreeClassifier, SplitSuggestion,
                   compute_fairness_gain, compute_info_gain,
                   fair_information_gain, hoeffding_bound)

__version__ = "0.1.0"

__all__ = [
    "AbruptDriftConfig", "Adwin", "AnomalyPipeline", "AnomalyRecord",
    "AnomalyScorer", "AnomalyVerdict", "BACKEND_NAME",
    "BiasedFairnessConfig", "CSmoteOversampler", "Classifier",
    "ConfusionCounts", "ContractError", "CsvStreamConfig",
    "CumulativeFairnessTracker", "DenseLayer", "DenseNetwork", "DriftState",
    "Eddm", "Estimator", "EstimatorContract", "FeatureVectorizer",
    "HalfSpaceTrees", "HoeffdingTreeClassifier", "ImbalancedAnomalyConfig",
    "Instance", "JointFrequencyTable", "MLPClassifier", "MinMaxScaler",
    "OnlineAutoencoder", "P2Quantile", "Pipeline", "PrequentialConfig",
    "QuantileFilter", "ResourceTracker", "RollingWindow", "RunAborted",
    "SensitiveSpec", "SplitSuggestion", "StandardScaler", "StreamSource",
    "Transformer", "UNKNOWN_CLASS", "accuracy", "available_backends",
    "check_distribution", "check_instance", "cohen_kappa",
    "compute_fairness_gain", "compute_info_gain", "f1_binary",
    "fair_information_gain", "gen_abrupt_drift", "gen_biased_fair",
    "gen_imbalanced_anomaly", "hoeffding_bound", "massage_chunk",
    "prequential_run", "read_csv_stream", "reweight_instance",
    "run_anomaly_pipeline", "smote_interpolate", "stream_from_iterator",
    "__version__",
]
