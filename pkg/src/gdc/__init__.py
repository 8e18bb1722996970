"""Few-shot classification over feature embeddings via distance-weighted
Gaussian calibration, covariance shrinkage, and synthetic sampling."""

from .calibrate import (
    CalibratedDistribution,
    CovMode,
    GdcConfig,
    calibrate_support_point,
    calibrated_moments,
    shrink,
    weights,
)
from .classify import LogRegModel, TrainingError, TrainRecipe, accuracy, predict, train
from .dataset import (
    DatasetError,
    FeatureDataset,
    Partition,
    SplitManifest,
    load_features,
    load_manifest,
    partition,
    write_features,
    write_manifest,
)
from .episodes import (
    EpisodeProtocol,
    EpisodeResult,
    Task,
    evaluate,
    run_episode,
    sample_task,
)
from .sampling import (
    ORIGIN_SAMPLED,
    ORIGIN_SUPPORT,
    AugmentedSet,
    augment_task,
    read_augmented,
    robust_cholesky,
    sample_mvn,
    write_augmented,
)
from .search import (
    ConfirmedCandidate,
    GridRange,
    SearchSpace,
    TrialRecord,
    TrialStatus,
    confirm_top,
    dogs_space,
    mini_cub_space,
    run_trial,
    sample_config,
    tune,
)
from .stats import (
    ClassStats,
    DistanceMetric,
    MetricKind,
    compute_base_stats,
    distance,
    read_stats_cache,
    top_k,
    write_stats_cache,
)
from .synth import CovarianceFamily, SynthSpec, generate, kl_gaussian
from .transforms import (
    TransformChoice,
    TransformKind,
    apply_transform,
    choose_transform,
    select_transform,
    tukey,
    yeo_johnson,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedSet",
    "CalibratedDistribution",
    "ClassStats",
    "ConfirmedCandidate",
    "CovMode",
    "CovarianceFamily",
    "DatasetError",
    "DistanceMetric",
    "EpisodeProtocol",
    "EpisodeResult",
    "FeatureDataset",
    "GdcConfig",
    "GridRange",
    "LogRegModel",
    "MetricKind",
    "ORIGIN_SAMPLED",
    "ORIGIN_SUPPORT",
    "Partition",
    "SearchSpace",
    "SplitManifest",
    "SynthSpec",
    "Task",
    "TrainRecipe",
    "TrainingError",
    "TransformChoice",
    "TransformKind",
    "TrialRecord",
    "TrialStatus",
    "accuracy",
    "apply_transform",
    "augment_task",
    "calibrate_support_point",
    "calibrated_moments",
    "choose_transform",
    "compute_base_stats",
    "confirm_top",
    "distance",
    "dogs_space",
    "evaluate",
    "generate",
    "kl_gaussian",
    "load_features",
    "load_manifest",
    "mini_cub_space",
    "partition",
    "predict",
    "read_augmented",
    "read_stats_cache",
    "robust_cholesky",
    "run_episode",
    "run_trial",
    "sample_config",
    "sample_mvn",
    "sample_task",
    "select_transform",
    "shrink",
    "top_k",
    "train",
    "tukey",
    "tune",
    "weights",
    "write_augmented",
    "write_features",
    "write_manifest",
    "write_stats_cache",
    "yeo_johnson",
]
