"""Comparison systems: single static net, model pool, sample-dependent dynamic net."""

from .pool import (
    MIN_FINETUNE_SIZE,
    FinetuneConfig,
    ModelPool,
    build_model_pool,
    load_pool,
    pool_infer,
    save_pool,
)
from .sdn import sdn_forward, sdn_forward_batch, train_sdn
from .static import train_static, whole_dataset_partition

__all__ = [
    "FinetuneConfig",
    "MIN_FINETUNE_SIZE",
    "ModelPool",
    "build_model_pool",
    "load_pool",
    "pool_infer",
    "save_pool",
    "sdn_forward",
    "sdn_forward_batch",
    "train_sdn",
    "train_static",
    "whole_dataset_partition",
]
