"""Frozen random conv encoder and domain embeddings.

The encoder is a 3-layer stride-2 conv net initialized from a fixed seed
and never trained; image features are the spatial average of its last
feature map (d = 32). Domain embeddings are means of member features,
computed once per partition and kept fixed thereafter.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..numerics.layers import ActivationKind, conv2d_raw, he_uniform
from .schema import DomainEmbedding, DomainPartition, SampleRecord

ENCODER_SEED = 0xE5C0DE
EMBED_DIM = 32

_CHANNELS = (3, 16, 32, EMBED_DIM)
_params: list[tuple[np.ndarray, np.ndarray]] | None = None


def _encoder_params() -> list[tuple[np.ndarray, np.ndarray]]:
    global _params
    if _params is None:
        rng = np.random.default_rng(ENCODER_SEED)
        layers = []
        for cin, cout in zip(_CHANNELS[:-1], _CHANNELS[1:]):
            weight = he_uniform((cout, cin, 3, 3), cin * 9, rng)
            # nonzero biases break the positive homogeneity of a bias-free
            # ReLU stack, so a brightness rescale changes feature direction
            # (not just magnitude) and domains separate in angle
            bias = rng.uniform(-0.3, 0.3, size=cout)
            layers.append((weight, bias))
        _params = layers
    return _params


def encoder_fingerprint() -> str:
    """Digest of the frozen encoder weights; must never change."""
    digest = hashlib.sha256()
    for weight, bias in _encoder_params():
        digest.update(np.ascontiguousarray(weight, dtype=np.float64).tobytes())
        digest.update(np.ascontiguousarray(bias, dtype=np.float64).tobytes())
    return digest.hexdigest()


def encode_batch(images: np.ndarray) -> np.ndarray:
    """(B, 3, 32, 32) -> (B, 32) features, deterministic, float64."""
    x = np.ascontiguousarray(images, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != (3, 32, 32):
        raise ValueError(f"expected images of shape (B, 3, 32, 32), got {x.shape}")
    for weight, bias in _encoder_params():
        x = conv2d_raw(x, weight, bias, stride=2, pad=1, act=ActivationKind.RELU)
    return x.mean(axis=(2, 3))


def encode_image(image: np.ndarray) -> np.ndarray:
    """(3, 32, 32) -> (32,) feature vector from the frozen encoder."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (3, 32, 32):
        raise ValueError(f"expected image of shape (3, 32, 32), got {image.shape}")
    return encode_batch(image[None])[0]


def domain_embedding(part: DomainPartition, tau: int, samples: list[SampleRecord],
                     encoder=None) -> DomainEmbedding:
    """Mean feature over the members of domain ``tau``; encoder injectable for tests."""
    if tau not in part.groups:
        raise KeyError(f"unknown domain id {tau}; partition has {sorted(part.groups)}")
    indices = part.groups[tau].indices
    if not indices:
        raise ValueError(f"domain {tau} is empty; cannot form an embedding")
    if encoder is None:
        feats = encode_batch(np.stack([samples[i].image for i in indices]))
    else:
        feats = np.stack([np.asarray(encoder(samples[i].image), dtype=np.float64)
                          for i in indices])
    return DomainEmbedding(vector=feats.mean(axis=0), count=len(indices))


def compute_domain_embeddings(part: DomainPartition, samples: list[SampleRecord],
                              encoder=None) -> dict[int, DomainEmbedding]:
    return {tau: domain_embedding(part, tau, samples, encoder=encoder)
            for tau in sorted(part.groups)}


def shuffle_embeddings(embeddings: dict[int, DomainEmbedding],
                       seed: int) -> dict[int, DomainEmbedding]:
    """Uniformly random reassignment of embeddings to domains (identity allowed)."""
    if len(embeddings) < 2:
        raise ValueError(f"need at least 2 embeddings to shuffle, got {len(embeddings)}")
    taus = sorted(embeddings)
    perm = np.random.default_rng(seed).permutation(len(taus))
    return {taus[i]: embeddings[taus[perm[i]]] for i in range(len(taus))}
