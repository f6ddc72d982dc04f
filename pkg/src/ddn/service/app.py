"""FastAPI service exposing dataset generation, training, evaluation, ablations,
factor export, and the throughput benchmark. The CLI is a thin client of this app."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..domains import DEFAULT_SCHEMA, partition, save_dataset
from ..dynnet import ArchSpec, DynamicNetwork, build_dynamic_network, load_checkpoint
from ..experiments import (
    ExperimentConfig,
    eval_mismatch,
    eval_shuffle,
    export_domain_factors_csv,
    export_image_factors_csv,
    prepare_data,
    recompute_metrics,
    run_experiment,
)
from ..inference import bench_throughput
from ..numerics import float_mode, set_float_mode
from . import schemas


def _parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_json(data)
    except (TypeError, ValueError, KeyError) as exc:
        raise HTTPException(status_code=422, detail=f"bad config: {exc}") from exc


def _load_dynamic(path: str) -> DynamicNetwork:
    try:
        net = load_checkpoint(path)
    except (OSError, ValueError) as exc:
        raise HTTPException(status_code=404, detail=f"cannot load checkpoint: {exc}") from exc
    if not isinstance(net, DynamicNetwork):
        raise HTTPException(status_code=422,
                            detail=f"{path} is not a dynamic-network checkpoint")
    return net


def create_app() -> FastAPI:
    app = FastAPI(title="ddn", version=__version__)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/datasets/generate", response_model=schemas.GenDataResponse)
    def gen_data(req: schemas.GenDataRequest):
        config = _parse_config(req.config)
        bundle = prepare_data(config)
        out = Path(req.out_dir) if req.out_dir else Path(config.output_dir) / "dataset"
        train_manifest = save_dataset(bundle.train_samples, DEFAULT_SCHEMA, out / "train")
        eval_manifest = save_dataset(bundle.eval_samples, DEFAULT_SCHEMA, out / "eval")
        return schemas.GenDataResponse(
            train_manifest=str(train_manifest),
            eval_manifest=str(eval_manifest),
            n_train=len(bundle.train_samples),
            n_eval=len(bundle.eval_samples),
            domains=bundle.train_part.domain_count,
        )

    @app.post("/runs/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        config = _parse_config(req.config)
        try:
            records = run_experiment(config, models=tuple(req.models))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.TrainResponse(
            metrics={kind: rec.to_json() for kind, rec in records.items()},
            output_dir=config.output_dir,
        )

    @app.post("/runs/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        try:
            record = recompute_metrics(req.run_dir, req.run_id)
        except (OSError, ValueError) as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return schemas.EvalResponse(metrics=record.to_json())

    @app.post("/runs/shuffle-eval", response_model=schemas.ShuffleEvalResponse)
    def shuffle_eval(req: schemas.ShuffleEvalRequest):
        config = _parse_config(req.config)
        net = _load_dynamic(req.checkpoint)
        bundle = prepare_data(config)
        try:
            result = eval_shuffle(net, bundle.eval_samples, bundle.eval_part,
                                  bundle.eval_embeddings, n_shuffles=req.shuffles,
                                  seed=req.shuffle_seed)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.ShuffleEvalResponse(**result.to_json())

    @app.post("/runs/mismatch-eval", response_model=schemas.MismatchEvalResponse)
    def mismatch_eval(req: schemas.MismatchEvalRequest):
        config = _parse_config(req.config)
        net = _load_dynamic(req.checkpoint)
        bundle = prepare_data(config)
        try:
            result = eval_mismatch(net, bundle.eval_samples, config.train_keys,
                                   tuple(req.eval_keys))
        except KeyError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.MismatchEvalResponse(**result.to_json())

    @app.post("/exports/factors", response_model=schemas.ExportFactorsResponse)
    def export_factors(req: schemas.ExportFactorsRequest):
        config = _parse_config(req.config)
        net = _load_dynamic(req.checkpoint)
        bundle = prepare_data(config)
        if req.per == "domain":
            path = export_domain_factors_csv(net, bundle.eval_part,
                                             bundle.eval_embeddings, req.out_path)
        elif req.per == "image":
            samples = bundle.eval_samples
            if req.max_images is not None:
                samples = samples[:req.max_images]
            path = export_image_factors_csv(net, samples, req.out_path)
        else:
            raise HTTPException(status_code=422,
                                detail=f"per must be 'domain' or 'image', got {req.per!r}")
        text = Path(path).read_text(encoding="utf-8").strip().split("\n")
        return schemas.ExportFactorsResponse(
            path=str(path), rows=len(text) - 1, columns=len(text[0].split(",")))

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench(req: schemas.BenchRequest):
        if req.mode not in ("folded", "persample"):
            raise HTTPException(status_code=422,
                                detail=f"mode must be folded|persample, got {req.mode!r}")
        previous_mode = float_mode()
        try:
            set_float_mode("f32" if req.float32 else "f64")
            if req.checkpoint:
                net = _load_dynamic(req.checkpoint)
            else:
                arch = (_parse_config(req.config).arch if req.config
                        else ArchSpec.from_json(ExperimentConfig(seed=0).arch.to_json()))
                net = build_dynamic_network(arch, k=req.k, embed_dim=32, seed=req.seed)
                rng = np.random.default_rng(req.seed)
                for layer in net.dynamic_layers():
                    for ctrl in layer.controllers:
                        ctrl.weight.data = rng.normal(size=net.embed_dim) * 0.3
            rng = np.random.default_rng(req.seed + 1)
            images = rng.uniform(size=(req.frames, 3, net.arch.image_hw,
                                       net.arch.image_hw))
            embedding = rng.normal(size=net.embed_dim)
            features = (np.tile(embedding, (req.frames, 1))
                        if req.mode == "folded"
                        else rng.normal(size=(req.frames, net.embed_dim)))
            try:
                report = bench_throughput(net, images, req.mode, embedding=embedding,
                                          features=features, warmup=req.warmup,
                                          repeats=req.repeats)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            return schemas.BenchResponse(report=report.to_json())
        finally:
            set_float_mode(previous_mode)

    return app


app = create_app()
