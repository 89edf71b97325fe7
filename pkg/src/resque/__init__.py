"""Forward-pass estimates of retraining cost under distribution shift and task change."""

from .clustering import KMeans, lloyd
from .datasets import LabeledDataset, SplitSpec, generate_synthetic, split_for_retraining
from .exceptions import (
    ConfigError,
    DegenerateError,
    FormatError,
    MissingClassError,
    NumericalError,
    ParameterError,
    ResqueError,
    StageError,
    UnderPoweredError,
)
from .randindex import adjusted_rand_index, contingency, resque_task_index, resque_task_pipeline
from .representation import ClassEmbeddingSet, ResqueDist, class_embeddings, resque_dist
from .shifts import NoiseSpec, ShiftTransformer, apply_shift, shift_samples
from .stats import pearson, spearman
from .trainer import (
    ModelParams,
    ModelSpec,
    RetrainableNet,
    RetrainMeasures,
    TrainConfig,
    extract_embeddings,
    init_params,
    train_to_cutoff,
)

__version__ = "0.1.0"

__all__ = [
    "ClassEmbeddingSet", "ConfigError", "DegenerateError", "FormatError", "KMeans",
    "LabeledDataset", "MissingClassError", "ModelParams", "ModelSpec", "NoiseSpec",
    "NumericalError", "ParameterError", "ResqueDist", "ResqueError", "RetrainMeasures",
    "RetrainableNet", "ShiftTransformer", "SplitSpec", "StageError", "TrainConfig",
    "UnderPoweredError", "adjusted_rand_index", "apply_shift", "class_embeddings",
    "contingency", "extract_embeddings", "generate_synthetic", "init_params", "lloyd",
    "pearson", "resque_dist", "resque_task_index", "resque_task_pipeline", "shift_samples",
    "spearman", "split_for_retraining", "train_to_cutoff",
]
