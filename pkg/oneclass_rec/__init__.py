"""
单类推荐工具包初始化文件
"""

from .base import (
    ToolkitError,
    DataFormatError,
    EmptyDatasetError,
    DataFileNotFoundError,
    ConfigError,
    SamplingError,
    IndexOutOfRangeError,
    MappingError,
    NumericalError,
    CheckpointMismatchError,
    GradientCheckError,
    GenerationError,
)
from .config import Ablation, ObjectiveConfig, TrainConfig
from .interactions import (
    InteractionDataset,
    Batch,
    WarmSplit,
    ColdSplit,
    load_interactions,
    sample_unobserved,
    leave_one_out_split,
    cold_start_split,
    make_batches,
    subsample_pairs,
    gen_synthetic_components,
)
from .encoder import EmbeddingModel, Mapping, init_model, predict_score, encode_item_features
from .objective import (
    loss_cont,
    loss_mse_similar,
    loss_bce,
    loss_bpr,
    loss_contrastive_neg,
    batch_stats,
    loss_hinge_pairwise,
    loss_orth,
    total_objective,
    finite_difference_check,
)
from .trainer import EpochReport, TrainState, train_epoch, fit
from .diagnostics import (
    CollapseReport,
    CollapseThresholds,
    Verdict,
    mean_dim_variance,
    mean_abs_correlation,
    pairwise_distance_bruteforce,
    classify_collapse,
    collapse_report,
)
from .evaluation import MetricResult, EvalProtocol, hit_ratio_at_k, recall_at_k, evaluate_run
from .experiments import SyntheticConfig, SyntheticReport, run_seed_sweep, run_size_sweep, run_synthetic_ablation

__all__ = [
    "ToolkitError",
    "DataFormatError",
    "EmptyDatasetError",
    "DataFileNotFoundError",
    "ConfigError",
    "SamplingError",
    "IndexOutOfRangeError",
    "MappingError",
    "NumericalError",
    "CheckpointMismatchError",
    "GradientCheckError",
    "GenerationError",
    "Ablation",
    "ObjectiveConfig",
    "TrainConfig",
    "InteractionDataset",
    "Batch",
    "WarmSplit",
    "ColdSplit",
    "load_interactions",
    "sample_unobserved",
    "leave_one_out_split",
    "cold_start_split",
    "make_batches",
    "subsample_pairs",
    "gen_synthetic_components",
    "EmbeddingModel",
    "Mapping",
    "init_model",
    "predict_score",
    "encode_item_features",
    "loss_cont",
    "loss_mse_similar",
    "loss_bce",
    "loss_bpr",
    "loss_contrastive_neg",
    "batch_stats",
    "loss_hinge_pairwise",
    "loss_orth",
    "total_objective",
    "finite_difference_check",
    "EpochReport",
    "TrainState",
    "train_epoch",
    "fit",
    "CollapseReport",
    "CollapseThresholds",
    "Verdict",
    "mean_dim_variance",
    "mean_abs_correlation",
    "pairwise_distance_bruteforce",
    "classify_collapse",
    "collapse_report",
    "MetricResult",
    "EvalProtocol",
    "hit_ratio_at_k",
    "recall_at_k",
    "evaluate_run",
    "SyntheticConfig",
    "SyntheticReport",
    "run_synthetic_ablation",
    "run_seed_sweep",
    "run_size_sweep",
]
