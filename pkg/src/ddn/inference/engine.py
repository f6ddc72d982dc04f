"""Deployment-side streaming engine: encode, detect, fold or hit the cache, run.

The active folded network is an immutable snapshot swapped atomically on
domain change; every frame runs on whatever snapshot is active when it
arrives. Callers that know the domain attributes can bypass the detector
by passing domain ids (``domain_embeddings`` must then cover them).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..domains.encoder import encode_image
from ..domains.schema import DomainEmbedding
from ..dynnet.network import DynamicNetwork, FoldedNetwork, embedding_fingerprint, fold_network
from ..numerics.tensor import float_dtype
from .cache import FoldCache
from .detector import DomainChanged, DomainDetector


@dataclass(frozen=True)
class StreamEvent:
    index: int
    kind: str  # "fold" | "cache_hit"
    fingerprint: str
    domain_id: int | None = None


@dataclass
class StreamEngine:
    net: DynamicNetwork
    cache: FoldCache
    detector: DomainDetector
    encoder: object = encode_image
    domain_embeddings: dict[int, DomainEmbedding] = field(default_factory=dict)
    active: FoldedNetwork | None = None

    @classmethod
    def create(cls, net: DynamicNetwork, capacity: int = 8,
               detector: DomainDetector | None = None, encoder=None,
               domain_embeddings: dict[int, DomainEmbedding] | None = None,
               ) -> "StreamEngine":
        return cls(
            net=net,
            cache=FoldCache(capacity),
            detector=detector or DomainDetector(dim=net.embed_dim),
            encoder=encoder or encode_image,
            domain_embeddings=domain_embeddings or {},
        )

    def _swap_to(self, embedding: np.ndarray, index: int,
                 domain_id: int | None) -> StreamEvent:
        embedding = np.asarray(embedding, dtype=float_dtype())
        fingerprint = embedding_fingerprint(embedding)
        cached = self.cache.get(fingerprint)
        if cached is not None:
            self.active = cached
            return StreamEvent(index, "cache_hit", fingerprint, domain_id)
        folded = fold_network(self.net, embedding, domain_id=domain_id)
        self.cache.put(fingerprint, folded)
        self.active = folded
        return StreamEvent(index, "fold", fingerprint, domain_id)


def stream_infer(engine: StreamEngine, images: np.ndarray,
                 features: np.ndarray | None = None,
                 domain_ids: list[int] | None = None,
                 ) -> tuple[np.ndarray, list[StreamEvent]]:
    """Run a stream; returns per-image logits and the fold/cache-hit event log.

    ``features`` skips the encoder (pre-extracted features); ``domain_ids``
    enables the known-attribute fast path and skips detection entirely.
    """
    events: list[StreamEvent] = []
    logits: list[np.ndarray] = []
    current_domain: int | None = None

    for index in range(len(images)):
        image = images[index]
        if domain_ids is not None:
            tau = domain_ids[index]
            if engine.active is None or tau != current_domain:
                if tau not in engine.domain_embeddings:
                    raise KeyError(f"no embedding for supplied domain id {tau}")
                events.append(engine._swap_to(engine.domain_embeddings[tau].vector,
                                              index, tau))
                current_domain = tau
        else:
            feature = features[index] if features is not None else engine.encoder(image)
            observed = engine.detector.observe(feature)
            if isinstance(observed, DomainChanged):
                events.append(engine._swap_to(observed.embedding, index, None))
        logits.append(engine.active.forward(image[None])[0])
    return np.stack(logits), events
