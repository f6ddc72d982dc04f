"""Synthetic multi-domain data, attribute partitions, frozen encoder, embeddings."""

from .encoder import (
    EMBED_DIM,
    ENCODER_SEED,
    compute_domain_embeddings,
    domain_embedding,
    encode_batch,
    encode_image,
    encoder_fingerprint,
    shuffle_embeddings,
)
from .manifest import load_dataset, save_dataset
from .schema import (
    DEFAULT_SCHEMA,
    AttributeSchema,
    DomainEmbedding,
    DomainGroup,
    DomainPartition,
    SampleRecord,
    partition,
    regroup,
)
from .synthetic import DatasetConfig, generate_dataset, render_sample

__all__ = [
    "AttributeSchema",
    "DEFAULT_SCHEMA",
    "DatasetConfig",
    "DomainEmbedding",
    "DomainGroup",
    "DomainPartition",
    "EMBED_DIM",
    "ENCODER_SEED",
    "SampleRecord",
    "compute_domain_embeddings",
    "domain_embedding",
    "encode_batch",
    "encode_image",
    "encoder_fingerprint",
    "generate_dataset",
    "load_dataset",
    "partition",
    "regroup",
    "render_sample",
    "save_dataset",
    "shuffle_embeddings",
]
