"""Dataset persistence: JSON manifest plus a flat binary tensor file.

The tensor file is little-endian float32, row-major, one image after
another in id order; the manifest records each sample's byte offset.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .schema import AttributeSchema, SampleRecord

MANIFEST_NAME = "manifest.json"
TENSOR_NAME = "images.bin"


def save_dataset(samples: list[SampleRecord], schema: AttributeSchema,
                 out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    offset = 0
    with open(out_dir / TENSOR_NAME, "wb") as fh:
        for idx, sample in enumerate(samples):
            blob = np.ascontiguousarray(sample.image, dtype="<f4").tobytes()
            fh.write(blob)
            records.append({
                "id": idx,
                "label": int(sample.label),
                "attrs": sample.attrs,
                "offset": offset,
            })
            offset += len(blob)
    manifest = {"schema": schema.to_json(), "samples": records}
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return out_dir / MANIFEST_NAME


def load_dataset(path: str | Path) -> tuple[list[SampleRecord], AttributeSchema]:
    """Load a dataset directory (or its manifest file path)."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    schema = AttributeSchema.from_json(manifest["schema"])
    raw = np.fromfile(path.parent / TENSOR_NAME, dtype="<f4")
    per_image = 3 * 32 * 32
    samples = []
    for rec in sorted(manifest["samples"], key=lambda r: r["id"]):
        start = rec["offset"] // 4
        image = raw[start:start + per_image].astype(np.float64).reshape(3, 32, 32)
        samples.append(SampleRecord(image=image, label=rec["label"], attrs=rec["attrs"]))
    return samples, schema
