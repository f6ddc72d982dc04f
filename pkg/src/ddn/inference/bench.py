"""Folded-reuse vs per-sample-recombination throughput benchmark.

Both modes run frame by frame at batch size 1 on pre-extracted features
(feature extraction is excluded from timing in both). Folded reuse folds
once and reuses the static snapshot; per-sample mode recombines every
layer's weights for every frame. Reported numbers are medians over
repeats; only orderings are meaningful, never absolute rates.
"""

from __future__ import annotations

import platform
import time
from dataclasses import asdict, dataclass

import numpy as np

from ..dynnet.network import DynamicNetwork, ExpertLayer, _run_layer_raw, fold_layer, fold_network
from ..numerics.tensor import float_dtype


@dataclass
class BenchReport:
    mode: str
    k: int
    frames: int
    fps_median: float
    fps_iqr: float
    fold_events: int
    host_info: dict
    fps_all: list[float] | None = None  # raw per-pass rates, not serialized

    def to_json(self) -> dict:
        data = asdict(self)
        data.pop("fps_all")
        return data


def host_info() -> dict:
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "float_mode": "f32" if float_dtype() == np.float32 else "f64",
    }


def persample_forward(net: DynamicNetwork, feature: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One frame with per-sample weight recombination (no snapshot reuse)."""
    out = x
    for layer in net.layers:
        if isinstance(layer, ExpertLayer):
            weight, _ = fold_layer(layer, feature)
            out = _run_layer_raw(layer.kind, out, weight, layer.bias.data,
                                 layer.stride, layer.pad, layer.act)
        else:
            out = _run_layer_raw(layer.kind, out, layer.weight.data, layer.bias.data,
                                 layer.stride, layer.pad, layer.act)
    return out


def bench_throughput(net: DynamicNetwork, images: np.ndarray, mode: str,
                     embedding: np.ndarray | None = None,
                     features: np.ndarray | None = None,
                     warmup: int = 32, repeats: int = 5) -> BenchReport:
    """Median frames/sec over ``repeats`` timed passes of the whole stream.

    mode "folded": fold once with ``embedding``, run the snapshot per frame.
    mode "persample": recombine with ``features[i]`` (or ``embedding``) per frame.
    """
    frames = len(images)
    if frames <= warmup:
        raise ValueError(f"stream of {frames} frames too short for warmup={warmup}")
    if mode not in ("folded", "persample"):
        raise ValueError(f"unknown benchmark mode {mode!r}")

    dtype = float_dtype()
    images = np.ascontiguousarray(images, dtype=dtype)
    if embedding is None and features is None:
        raise ValueError("need an embedding (folded) or per-frame features (persample)")
    if embedding is not None:
        embedding = np.asarray(embedding, dtype=dtype)
    if features is None:
        features = np.tile(embedding, (frames, 1))
    features = np.ascontiguousarray(features, dtype=dtype)

    if mode == "folded":
        folded = fold_network(net, embedding if embedding is not None else features[0])
        fold_events = 1

        def run_frame(i):
            return folded.forward(images[i][None])
    else:
        fold_events = frames

        def run_frame(i):
            return persample_forward(net, features[i], images[i][None])

    for i in range(warmup):
        run_frame(i % frames)

    rates = []
    for _ in range(repeats):
        start = time.perf_counter()
        for i in range(frames):
            run_frame(i)
        elapsed = time.perf_counter() - start
        rates.append(frames / elapsed)
    rates = np.sort(np.asarray(rates))
    q75, q25 = np.percentile(rates, [75, 25])
    return BenchReport(
        mode=mode,
        k=net.k,
        frames=frames,
        fps_median=float(np.median(rates)),
        fps_iqr=float(q75 - q25),
        fold_events=fold_events,
        host_info=host_info(),
        fps_all=[float(r) for r in rates],
    )
