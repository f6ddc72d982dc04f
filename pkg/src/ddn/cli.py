"""Command-line client for the service.

Every command builds a request payload and POSTs it to the service: to a
remote process when ``--server`` is given, otherwise to an in-process app
through an ASGI transport, so the HTTP layer is exercised either way.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx


def _call(server: str | None, method: str, path: str, payload: dict | None = None) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.request(method, path, json=payload)
    else:
        from .service import create_app

        async def _run():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://ddn.local",
                                         timeout=None) as client:
                return await client.request(method, path, json=payload)

        response = asyncio.run(_run())
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        click.echo(f"error ({response.status_code}): {detail}", err=True)
        sys.exit(1)
    return response.json()


def _load_config(config_path: str | None, **overrides) -> dict:
    data: dict = {}
    if config_path:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    if "seed" not in data:
        data["seed"] = 0
    return data


def _echo(result: dict) -> None:
    click.echo(json.dumps(result, indent=2))


@click.group()
@click.option("--server", envvar="DDN_SERVER", default=None,
              help="Service URL; omit to run the service in-process.")
@click.pass_context
def main(ctx, server):
    """Domain-aware dynamic networks: train, evaluate, export, benchmark."""
    ctx.obj = {"server": server}


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("ddn.service:app", host=host, port=port)


@main.command("gen-data")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Experiment config JSON.")
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", default=None, help="Dataset output directory.")
@click.option("--output-dir", default=None)
@click.pass_context
def gen_data(ctx, config_path, seed, out_dir, output_dir):
    """Generate the synthetic multi-domain dataset (manifest + tensor file)."""
    config = _load_config(config_path, seed=seed, output_dir=output_dir)
    _echo(_call(ctx.obj["server"], "POST", "/datasets/generate",
                {"config": config, "out_dir": out_dir}))


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--model", "models", multiple=True,
              type=click.Choice(["static", "pool", "ddn", "sdn"]),
              help="Model kind; repeatable. Default: static and ddn.")
@click.option("--k", type=int, default=None, help="Expert expansion factor.")
@click.option("--seed", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--output-dir", default=None)
@click.pass_context
def train(ctx, config_path, models, k, seed, steps, output_dir):
    """Train the requested models and persist checkpoints plus metrics."""
    config = _load_config(config_path, seed=seed, steps=steps, k=k,
                          output_dir=output_dir)
    payload = {"config": config, "models": list(models) or ["static", "ddn"]}
    _echo(_call(ctx.obj["server"], "POST", "/runs/train", payload))


@main.command("eval")
@click.option("--run-dir", required=True, help="Directory written by `train`.")
@click.option("--run-id", required=True, help="e.g. ddn-k2-seed0")
@click.pass_context
def evaluate(ctx, run_dir, run_id):
    """Recompute metrics for a persisted checkpoint from persisted data."""
    _echo(_call(ctx.obj["server"], "POST", "/runs/eval",
                {"run_dir": run_dir, "run_id": run_id}))


@main.command("shuffle-eval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", required=True)
@click.option("--shuffles", type=int, default=20)
@click.option("--seed", type=int, default=None)
@click.pass_context
def shuffle_eval(ctx, config_path, checkpoint, shuffles, seed):
    """Evaluate with correct vs randomly reassigned domain embeddings."""
    config = _load_config(config_path, seed=seed)
    _echo(_call(ctx.obj["server"], "POST", "/runs/shuffle-eval",
                {"config": config, "checkpoint": checkpoint, "shuffles": shuffles}))


@main.command("mismatch-eval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", required=True)
@click.option("--eval-keys", required=True, help="Comma-separated attributes, e.g. scene")
@click.option("--seed", type=int, default=None)
@click.pass_context
def mismatch_eval(ctx, config_path, checkpoint, eval_keys, seed):
    """Evaluate under a different domain grouping than training."""
    config = _load_config(config_path, seed=seed)
    payload = {"config": config, "checkpoint": checkpoint,
               "eval_keys": [k.strip() for k in eval_keys.split(",") if k.strip()]}
    _echo(_call(ctx.obj["server"], "POST", "/runs/mismatch-eval", payload))


@main.command("export-factors")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", required=True)
@click.option("--per", type=click.Choice(["domain", "image"]), default="domain")
@click.option("--out", "out_path", required=True)
@click.option("--max-images", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
def export_factors(ctx, config_path, checkpoint, per, out_path, max_images, seed):
    """Write combination-factor vectors to CSV (one row per domain or image)."""
    config = _load_config(config_path, seed=seed)
    payload = {"config": config, "checkpoint": checkpoint, "per": per,
               "out_path": out_path, "max_images": max_images}
    _echo(_call(ctx.obj["server"], "POST", "/exports/factors", payload))


@main.command("bench")
@click.option("--mode", type=click.Choice(["folded", "persample"]), required=True)
@click.option("--k", type=int, default=4)
@click.option("--frames", type=int, default=1000)
@click.option("--warmup", type=int, default=32)
@click.option("--repeats", type=int, default=5)
@click.option("--seed", type=int, default=0)
@click.option("--checkpoint", default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--f64", is_flag=True, help="Benchmark in f64 instead of f32.")
@click.pass_context
def bench(ctx, mode, k, frames, warmup, repeats, seed, checkpoint, config_path, f64):
    """Folded-reuse vs per-sample-recombination throughput."""
    payload = {
        "mode": mode, "k": k, "frames": frames, "warmup": warmup,
        "repeats": repeats, "seed": seed, "checkpoint": checkpoint,
        "config": json.loads(Path(config_path).read_text()) if config_path else None,
        "float32": not f64,
    }
    _echo(_call(ctx.obj["server"], "POST", "/bench", payload))


if __name__ == "__main__":
    main()
