import json

import pytest
from fastapi.testclient import TestClient

import main

CONFIG = {
    "experiment": "solve",
    "path": {"kind": "smooth", "family": "linear", "scales": [1.0], "horizon": 1.0, "grid_size": 33},
    "system": {"x0": [1.0], "fields": [{"kind": "zero"}, {"kind": "linear", "matrix": [[1.0]]}]},
}


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(main, "OUTPUT_DIR", str(tmp_path))
    return TestClient(main.app)


def test_root_and_health(client):
    assert client.get("/health").json() == {"status": "healthy"}
    body = client.get("/").json()
    assert "/run" in body["endpoints"]


def test_validate(client):
    response = client.post("/validate", json=CONFIG)
    assert response.status_code == 200
    assert response.json()["parameters"]["max_iter"] == 50

    bad = dict(CONFIG, parameters={"alpha": 0.7})
    response = client.post("/validate", json=bad)
    assert response.status_code == 422
    assert "alpha" in response.json()["detail"]


def test_run_writes_artifacts(client, tmp_path):
    response = client.post("/run", params={"name": "demo"}, json=CONFIG)
    assert response.status_code == 200
    manifest = response.json()
    assert manifest["outputs"] == ["solution.csv"]
    assert manifest["experiment"] == "solve"
    on_disk = json.loads((tmp_path / "demo" / "manifest.json").read_text(encoding="utf-8"))
    assert on_disk["outputs"] == manifest["outputs"]


def test_run_rejects_bad_name(client):
    response = client.post("/run", params={"name": "../escape"}, json=CONFIG)
    assert response.status_code == 422


def test_run_maps_domain_errors(client, tmp_path):
    config = dict(CONFIG, experiment="bound")
    config["path"] = dict(CONFIG["path"], beta_hint=0.6)
    response = client.post("/run", params={"name": "rough"}, json=config)
    assert response.status_code == 422
    assert (tmp_path / "rough" / "error.json").is_file()
