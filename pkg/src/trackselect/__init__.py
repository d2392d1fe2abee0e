"""Tracker-portfolio evaluation and best-tracker selection toolkit.

Given per-sequence tracker outputs and ground truth, this package labels
each video with its best tracker, trains a selection classifier on early-
frame features, assembles meta-tracker trajectories by per-video or
per-interval selection, and evaluates everything with standard
trajectory metrics -- plus a deterministic synthetic benchmark generator
so the whole pipeline runs in seconds without real data.
"""

from .geometry import BBox, MaybeBox, center_error, iou, norm_center_error
from .dataset_io import (
    Manifest,
    ResultSet,
    SequenceRecord,
    Trajectory,
    load_manifest,
    load_results,
    load_sequences,
    parse_trajectory,
    serialize_trajectory,
)
from .metrics import (
    MetricReport,
    SequenceMetrics,
    average_overlap,
    norm_precision,
    precision_at,
    sequence_metrics,
    simplified_eao,
    success_auc,
    success_rate,
    top1_accuracy,
)
from .labels import SelectionLabel, build_label_set, normalize, onehot, performance_vector
from .augment import AugmentSpec, expand_training_set
from .predictor import (
    ClassifierModel,
    Featurizer,
    PredictionRecord,
    TrainingConfig,
    export_predictions,
    load_external_predictions,
    predict,
    train,
)
from .selection import (
    FixedPolicy,
    OraclePolicy,
    PredictedPolicy,
    RandomPolicy,
    SelectionPlan,
    ablate_pool_size,
    evaluate_policy,
    nested_pools,
    select_frame_level,
    select_video_level,
    splice,
)
from .synth import ScenarioSpec, SkillProfile, generate_benchmark, separable_scenario

__version__ = "0.1.0"
