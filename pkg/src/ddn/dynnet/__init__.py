"""Dynamic networks: expert layers, controllers, folding, and training."""

from .checkpoint import clone_network, load_checkpoint, save_checkpoint
from .network import (
    DEFAULT_ARCH,
    ArchSpec,
    ControllerParams,
    ConvSpec,
    DynamicNetwork,
    ExpertLayer,
    FoldedNetwork,
    FoldProvenance,
    StaticLayer,
    StaticNetwork,
    build_dynamic_network,
    build_static_network,
    controller_alpha,
    embedding_fingerprint,
    export_factor_vector,
    fold_layer,
    fold_network,
)
from .training import TrainConfig, TrainHistory, run_training, stack_images, train_ddn

__all__ = [
    "ArchSpec",
    "ControllerParams",
    "ConvSpec",
    "DEFAULT_ARCH",
    "DynamicNetwork",
    "ExpertLayer",
    "FoldProvenance",
    "FoldedNetwork",
    "StaticLayer",
    "StaticNetwork",
    "TrainConfig",
    "TrainHistory",
    "build_dynamic_network",
    "build_static_network",
    "clone_network",
    "controller_alpha",
    "embedding_fingerprint",
    "export_factor_vector",
    "fold_layer",
    "fold_network",
    "load_checkpoint",
    "run_training",
    "save_checkpoint",
    "stack_images",
    "train_ddn",
]
