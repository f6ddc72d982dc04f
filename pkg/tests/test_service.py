import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from ddn.numerics import float_mode
from ddn.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    out = tmp_path_factory.mktemp("svc_runs")
    return {
        "seed": 0,
        "output_dir": str(out),
        "classes": 4,
        "per_domain_train": 12,
        "per_domain_eval": 8,
        "arch": {"convs": [[8, 3, 2, 1], [16, 3, 2, 1]], "hidden": 32,
                 "classes": 4, "in_channels": 3, "image_hw": 32},
        "k": 2,
        "steps": 20,
        "batch_size": 8,
    }


@pytest.fixture(scope="module")
def trained_run(client, tiny_config):
    resp = client.post("/runs/train",
                       json={"config": tiny_config, "models": ["static", "ddn"]})
    assert resp.status_code == 200, resp.text
    return resp.json()


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_gen_data(client, tiny_config, tmp_path):
    resp = client.post("/datasets/generate",
                       json={"config": tiny_config, "out_dir": str(tmp_path / "ds")})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["n_train"] == 12 * 12 and body["n_eval"] == 8 * 12
    assert body["domains"] == 6  # time x weather
    assert Path(body["train_manifest"]).exists()
    assert Path(body["eval_manifest"]).with_name("images.bin").exists()


def test_train_returns_metrics_and_persists(trained_run, tiny_config):
    metrics = trained_run["metrics"]
    assert set(metrics) == {"static", "ddn"}
    assert metrics["ddn"]["params_total"] > metrics["ddn"]["params_inference"]
    assert metrics["static"]["params_total"] == metrics["static"]["params_inference"]
    out = Path(tiny_config["output_dir"])
    assert (out / "ddn-k2-seed0.ddn").exists()
    assert (out / "static-seed0.ddn").exists()
    assert (out / "config.json").exists()


def test_eval_recomputes(client, trained_run, tiny_config):
    resp = client.post("/runs/eval", json={"run_dir": tiny_config["output_dir"],
                                           "run_id": "ddn-k2-seed0"})
    assert resp.status_code == 200, resp.text
    recomputed = resp.json()["metrics"]
    assert recomputed["val_accuracy"] == pytest.approx(
        trained_run["metrics"]["ddn"]["val_accuracy"], abs=1e-9)


def test_shuffle_eval_endpoint(client, trained_run, tiny_config):
    checkpoint = str(Path(tiny_config["output_dir"]) / "ddn-k2-seed0.ddn")
    resp = client.post("/runs/shuffle-eval",
                       json={"config": tiny_config, "checkpoint": checkpoint,
                             "shuffles": 3})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["worst"] <= body["average"] + 1e-12
    assert len(body["shuffled"]) == 3


def test_mismatch_eval_endpoint(client, trained_run, tiny_config):
    checkpoint = str(Path(tiny_config["output_dir"]) / "ddn-k2-seed0.ddn")
    resp = client.post("/runs/mismatch-eval",
                       json={"config": tiny_config, "checkpoint": checkpoint,
                             "eval_keys": ["scene"]})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["reference_folds"] == 1
    assert 0.0 <= body["mismatched"] <= 1.0


def test_export_factors_endpoint(client, trained_run, tiny_config, tmp_path):
    checkpoint = str(Path(tiny_config["output_dir"]) / "ddn-k2-seed0.ddn")
    out_csv = tmp_path / "factors.csv"
    resp = client.post("/exports/factors",
                       json={"config": tiny_config, "checkpoint": checkpoint,
                             "per": "domain", "out_path": str(out_csv)})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert Path(body["path"]).exists()
    assert body["rows"] == 6
    assert body["columns"] == 1 + 2 + 2 * 2  # id + (time, weather) + L


def test_bench_endpoint_restores_float_mode(client, tiny_config):
    before = float_mode()
    resp = client.post("/bench", json={"mode": "persample", "k": 2, "frames": 40,
                                       "warmup": 4, "repeats": 1,
                                       "config": tiny_config})
    assert resp.status_code == 200, resp.text
    report = resp.json()["report"]
    assert report["fold_events"] == 40
    assert report["host_info"]["float_mode"] == "f32"
    assert float_mode() == before
    assert set(report) == {"mode", "k", "frames", "fps_median", "fps_iqr",
                           "fold_events", "host_info"}


def test_bench_bad_mode_rejected(client):
    resp = client.post("/bench", json={"mode": "warp", "frames": 40})
    assert resp.status_code == 422


def test_missing_checkpoint_404(client, tiny_config):
    resp = client.post("/runs/shuffle-eval",
                       json={"config": tiny_config, "checkpoint": "/nope/x.ddn",
                             "shuffles": 2})
    assert resp.status_code == 404


def test_bad_model_kind_422(client, tiny_config):
    resp = client.post("/runs/train",
                       json={"config": tiny_config, "models": ["transformer"]})
    assert resp.status_code == 422
