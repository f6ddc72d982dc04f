"""Run metrics: accuracies, per-domain table, parameter counts, wall-clock."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class MetricsRecord:
    run_id: str
    model_kind: str
    train_accuracy: float
    val_accuracy: float
    per_domain: dict[int, dict] = field(default_factory=dict)
    params_total: int = 0
    params_inference: int = 0
    wall_clock_sec: float = 0.0
    extra: dict = field(default_factory=dict)

    def validate(self, tol: float = 1e-9) -> None:
        """Per-domain accuracies must weighted-average to the overall accuracy."""
        if not self.per_domain:
            return
        counts = np.array([d["count"] for d in self.per_domain.values()], dtype=float)
        accs = np.array([d["accuracy"] for d in self.per_domain.values()])
        weighted = float((counts * accs).sum() / counts.sum())
        if abs(weighted - self.val_accuracy) > tol:
            raise ValueError(
                f"per-domain accuracies average to {weighted}, "
                f"but overall accuracy is {self.val_accuracy}"
            )

    def to_json(self) -> dict:
        data = asdict(self)
        data["per_domain"] = {str(tau): entry for tau, entry in self.per_domain.items()}
        return data

    @classmethod
    def from_json(cls, data: dict) -> "MetricsRecord":
        data = dict(data)
        data["per_domain"] = {int(tau): entry
                              for tau, entry in data.get("per_domain", {}).items()}
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MetricsRecord":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
