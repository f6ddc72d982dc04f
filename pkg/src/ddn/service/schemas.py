"""Request/response models for the experiment and benchmark service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class GenDataRequest(BaseModel):
    config: dict
    out_dir: str | None = None  # defaults to config output_dir / "dataset"


class GenDataResponse(BaseModel):
    train_manifest: str
    eval_manifest: str
    n_train: int
    n_eval: int
    domains: int


class TrainRequest(BaseModel):
    config: dict
    models: list[str] = Field(default_factory=lambda: ["static", "ddn"])


class TrainResponse(BaseModel):
    metrics: dict[str, dict]
    output_dir: str


class EvalRequest(BaseModel):
    run_dir: str
    run_id: str


class EvalResponse(BaseModel):
    metrics: dict


class ShuffleEvalRequest(BaseModel):
    config: dict
    checkpoint: str
    shuffles: int = 20
    shuffle_seed: int = 0


class ShuffleEvalResponse(BaseModel):
    normal: float
    worst: float
    average: float
    shuffled: list[float]


class MismatchEvalRequest(BaseModel):
    config: dict
    checkpoint: str
    eval_keys: list[str]


class MismatchEvalResponse(BaseModel):
    matched: float
    mismatched: float
    reference: float
    reference_folds: int


class ExportFactorsRequest(BaseModel):
    config: dict
    checkpoint: str
    per: str = "domain"  # "domain" | "image"
    out_path: str
    max_images: int | None = None


class ExportFactorsResponse(BaseModel):
    path: str
    rows: int
    columns: int


class BenchRequest(BaseModel):
    mode: str  # "folded" | "persample"
    k: int = 4
    frames: int = 1000
    warmup: int = 32
    repeats: int = 5
    seed: int = 0
    config: dict | None = None      # optional arch source
    checkpoint: str | None = None   # optional trained net
    float32: bool = True


class BenchResponse(BaseModel):
    report: dict
