"""Experiment configs, the benchmark driver, ablations, and exports."""

from .config import ExperimentConfig
from .export import export_domain_factors_csv, export_image_factors_csv
from .metrics import MetricsRecord
from .runner import (
    MODEL_KINDS,
    DataBundle,
    MismatchResult,
    ShuffleResult,
    eval_ddn_grouped,
    eval_mismatch,
    eval_pool,
    eval_sdn,
    eval_shuffle,
    eval_static_like,
    prepare_data,
    recompute_metrics,
    run_experiment,
)

__all__ = [
    "DataBundle",
    "ExperimentConfig",
    "MODEL_KINDS",
    "MetricsRecord",
    "MismatchResult",
    "ShuffleResult",
    "eval_ddn_grouped",
    "eval_mismatch",
    "eval_pool",
    "eval_sdn",
    "eval_shuffle",
    "eval_static_like",
    "export_domain_factors_csv",
    "export_image_factors_csv",
    "prepare_data",
    "recompute_metrics",
    "run_experiment",
]
