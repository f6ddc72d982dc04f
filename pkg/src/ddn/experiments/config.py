"""Experiment configuration: one JSON-round-trippable object drives a run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..baselines.pool import FinetuneConfig
from ..dynnet.network import DEFAULT_ARCH, ArchSpec
from ..dynnet.training import TrainConfig


@dataclass
class ExperimentConfig:
    seed: int                       # mandatory: training init + sampling
    output_dir: str = "runs"
    # dataset
    classes: int = 10
    per_domain_train: int = 600
    per_domain_eval: int = 150
    data_seed: int | None = None    # defaults to `seed`
    # architecture
    arch: ArchSpec = DEFAULT_ARCH
    k: int = 2
    embed_dim: int = 32
    # training
    steps: int = 4000
    batch_size: int = 32
    lr: float = 0.03
    momentum: float = 0.9
    lr_drop_milestones: tuple[float, ...] = (0.75, 0.92)
    lr_drop_factor: float = 0.1
    warmup_steps: int = 0
    # domain keys
    train_keys: tuple[str, ...] = ("time", "weather")
    eval_keys: tuple[str, ...] = ("time", "weather")
    # pool finetuning
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("seed is mandatory")

    @property
    def effective_data_seed(self) -> int:
        return self.seed if self.data_seed is None else self.data_seed

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            steps=self.steps,
            batch_size=self.batch_size,
            lr=self.lr,
            momentum=self.momentum,
            lr_drop_milestones=tuple(self.lr_drop_milestones),
            lr_drop_factor=self.lr_drop_factor,
            warmup_steps=self.warmup_steps,
            seed=self.seed,
        )

    def to_json(self) -> dict:
        data = asdict(self)
        data["arch"] = self.arch.to_json()
        data["lr_drop_milestones"] = list(self.lr_drop_milestones)
        data["train_keys"] = list(self.train_keys)
        data["eval_keys"] = list(self.eval_keys)
        return data

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "arch" in data:
            data["arch"] = ArchSpec.from_json(data["arch"])
        if "finetune" in data and isinstance(data["finetune"], dict):
            data["finetune"] = FinetuneConfig(**data["finetune"])
        for key in ("lr_drop_milestones", "train_keys", "eval_keys"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
