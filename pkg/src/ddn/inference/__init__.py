"""Deployment engine: fold cache, domain-change detection, streaming, benchmark."""

from .bench import BenchReport, bench_throughput, host_info, persample_forward
from .cache import FoldCache
from .detector import DomainChanged, DomainDetector, Stable, cosine_distance, tree_mean
from .engine import StreamEngine, StreamEvent, stream_infer

__all__ = [
    "BenchReport",
    "DomainChanged",
    "DomainDetector",
    "FoldCache",
    "Stable",
    "StreamEngine",
    "StreamEvent",
    "bench_throughput",
    "cosine_distance",
    "host_info",
    "persample_forward",
    "stream_infer",
    "tree_mean",
]
