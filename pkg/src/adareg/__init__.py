"""Adaptive per-parameter regularization lab for sparse categorical models."""

from .datagen import (
    Batch,
    Dataset,
    FeatureSpec,
    SynthSpec,
    batch_iter,
    filter_by_frequency,
    generate_synthetic,
    load_csv,
)
from .estimator import SparseCTRClassifier
from .harness import ExperimentConfig, run_experiment
from .metrics import BoundInputs, auc, embedding_norms, feature_stats, rademacher_bound
from .model import EmbeddingTable, MlpParams, backward, embed_lookup, forward, init_model, loss_bce
from .optim import (
    OptimizerConfig,
    adagrad_ar_step,
    adam_ar_step,
    baseline_step,
    lambda_adaptive,
    meda_reinit,
    meda_schedule_interval,
    optimizer_step,
)

__all__ = [
    "Batch",
    "BoundInputs",
    "Dataset",
    "EmbeddingTable",
    "ExperimentConfig",
    "FeatureSpec",
    "MlpParams",
    "OptimizerConfig",
    "SparseCTRClassifier",
    "SynthSpec",
    "adagrad_ar_step",
    "adam_ar_step",
    "auc",
    "backward",
    "baseline_step",
    "batch_iter",
    "embed_lookup",
    "embedding_norms",
    "feature_stats",
    "filter_by_frequency",
    "forward",
    "generate_synthetic",
    "init_model",
    "lambda_adaptive",
    "load_csv",
    "loss_bce",
    "meda_reinit",
    "meda_schedule_interval",
    "optimizer_step",
    "rademacher_bound",
    "run_experiment",
]
