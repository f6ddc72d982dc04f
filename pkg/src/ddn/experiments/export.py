"""Factor-vector CSV export for offline analysis and plotting."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..domains import DomainEmbedding, DomainPartition, SampleRecord, encode_batch
from ..dynnet import DynamicNetwork, export_factor_vector


def _factor_header(attr_names, n_factors: int) -> list[str]:
    return ["id", *attr_names, *(f"alpha_{i + 1}" for i in range(n_factors))]


def _write_rows(path: str | Path, header: list[str], rows: list[list]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def export_domain_factors_csv(net: DynamicNetwork, part: DomainPartition,
                              embeddings: dict[int, DomainEmbedding],
                              path: str | Path) -> Path:
    """One row per domain: id, key-attribute values, then all factors."""
    rows = []
    n_factors = None
    for tau in sorted(part.groups):
        factors = export_factor_vector(net, embeddings[tau].vector)
        n_factors = len(factors)
        rows.append([tau, *part.groups[tau].attrs, *(repr(float(a)) for a in factors)])
    if n_factors is None:
        raise ValueError("partition has no domains to export")
    return _write_rows(path, _factor_header(part.key_attrs, n_factors), rows)


def export_image_factors_csv(net: DynamicNetwork, samples: list[SampleRecord],
                             path: str | Path,
                             features: np.ndarray | None = None) -> Path:
    """One row per image: id, all attribute values, then that image's factors."""
    if not samples:
        raise ValueError("no samples to export")
    if features is None:
        features = encode_batch(np.stack([s.image for s in samples]))
    attr_names = list(samples[0].attrs)
    rows = []
    n_factors = 0
    for idx, sample in enumerate(samples):
        factors = export_factor_vector(net, features[idx])
        n_factors = len(factors)
        rows.append([idx, *(sample.attrs[a] for a in attr_names),
                     *(repr(float(a)) for a in factors)])
    return _write_rows(path, _factor_header(attr_names, n_factors), rows)
