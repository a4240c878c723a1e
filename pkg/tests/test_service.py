import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from potacc.codec import read_potq
from potacc.methods import PoTMethod
from potacc.reports import SIM_REPORT_SCHEMA
from potacc.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_profiles_expose_frozen_table(client):
    r = client.get("/profiles")
    assert r.status_code == 200
    body = r.json()
    rows = {row["kind"]: row for row in body["pe_costs"]}
    assert rows["shift_qkeras"]["lut"] == 33
    assert rows["shift_qkeras"]["shift_cycles"] == 1
    assert rows["mult_uniform"]["lut"] == 41
    assert rows["shift_apot"]["ff"] == 19
    assert body["base_mac_cycles"] == 2
    assert body["defaults"]["accel_hz"] == 250e6


def test_quantize_values_roundtrip(client):
    r = client.post("/quantize", json={
        "method": "msq",
        "shape": [3],
        "values": [0.5, -0.25, 0.75],
        "scale_exp": 0,
    })
    assert r.status_code == 200
    body = r.json()
    qt = read_potq(base64.b64decode(body["potq_b64"]))
    assert qt.method is PoTMethod.MSQ_8_4
    assert qt.dequantize().tolist() == [0.5, -0.25, 0.75]
    assert body["stats"]["mse"] == 0.0


def test_quantize_b64_floats(client):
    data = np.array([0.25, -0.125], dtype="<f4").tobytes()
    r = client.post("/quantize", json={
        "method": "qkeras",
        "shape": [2],
        "data_b64": base64.b64encode(data).decode(),
    })
    assert r.status_code == 200
    qt = read_potq(base64.b64decode(r.json()["potq_b64"]))
    assert qt.dequantize().tolist() == [0.25, -0.125]


def test_quantize_int8_pot_mode(client):
    data = np.array([1, -2, 64, -128], dtype=np.int8).tobytes()
    r = client.post("/quantize", json={
        "method": "qkeras",
        "shape": [4],
        "data_b64": base64.b64encode(data).decode(),
        "from_int8_pot": True,
    })
    assert r.status_code == 200
    qt = read_potq(base64.b64decode(r.json()["potq_b64"]))
    assert qt.codes.tolist() == [0b0000, 0b1001, 0b0110, 0b1111]
    assert r.json()["stats"]["max_abs_error"] == 0.0


def test_quantize_validation_errors(client):
    r = client.post("/quantize", json={"method": "uniform", "shape": [1], "values": [1.0]})
    assert r.status_code == 422
    r = client.post("/quantize", json={"method": "msq", "shape": [2], "values": [1.0]})
    assert r.status_code == 422
    r = client.post("/quantize", json={"method": "msq", "shape": [1]})
    assert r.status_code == 422
    r = client.post("/quantize", json={"method": "nope", "shape": [1], "values": [1.0]})
    assert r.status_code == 422  # pydantic enum validation


def test_pe_check_endpoint(client):
    r = client.post("/pe-check", json={})
    assert r.status_code == 200
    body = r.json()
    assert body["passed"] is True
    kinds = {res["kind"]: res["cases"] for res in body["results"]}
    assert kinds["shift_qkeras"] == 4096
    assert kinds["mult_uniform"] == 65536


def test_pe_check_subset(client):
    r = client.post("/pe-check", json={"methods": ["msq"]})
    assert r.status_code == 200
    assert [res["kind"] for res in r.json()["results"]] == ["shift_msq"]


def test_bench_suite_averages(client):
    r = client.post("/bench", json={"profile": "measured", "overhead": 0})
    assert r.status_code == 200
    body = r.json()
    assert body["n_cases"] == 27
    assert len(body["rows"]) == 27 * 4
    summary = {s["kind"]: s for s in body["summaries"]}
    assert summary["shift_qkeras"]["average_speedup"] == pytest.approx(1.60, abs=0.01)
    assert summary["shift_qkeras"]["reference_speedup"] == 1.60
    assert summary["mult_uniform"]["average_energy_reduction"] == 1.0
    assert body["note"] is None


def test_bench_single_case_and_note(client):
    r = client.post("/bench", json={"profile": "analytic", "case": "128x64x256",
                                    "methods": ["apot"], "overhead": 0})
    assert r.status_code == 200
    body = r.json()
    assert len(body["rows"]) == 1
    assert body["rows"][0]["speedup"] == pytest.approx(2 / 3, abs=1e-9)
    assert body["note"] is not None


def test_bench_bad_case(client):
    r = client.post("/bench", json={"case": "12x9"})
    assert r.status_code == 422


def test_run_model_fixture(client):
    jsonschema = pytest.importorskip("jsonschema")
    r = client.post("/run-model", json={"fixture": "resnet18", "method": "qkeras"})
    assert r.status_code == 200
    report = r.json()["report"]
    jsonschema.validate(report, SIM_REPORT_SCHEMA)
    assert report["model"] == "resnet18"
    assert report["totals"]["time_ms"] > 0
    placements = {l["placement"] for l in report["layers"]}
    assert placements == {"ACCEL", "CPU"}


def test_run_model_requires_exactly_one_source(client):
    r = client.post("/run-model", json={})
    assert r.status_code == 422
    r = client.post("/run-model", json={"fixture": "resnet18", "model_doc": {"x": 1}})
    assert r.status_code == 422


def test_run_model_inline_numeric(client):
    import random

    from potacc.codec import QuantizedTensor, write_potq

    rng = random.Random(2)
    codes = np.array([rng.randint(0, 15) for _ in range(1 * 1 * 2 * 3)], dtype=np.uint8)
    qt = QuantizedTensor((1, 1, 2, 3), codes, 0, PoTMethod.QKERAS_8_4)
    doc = {
        "name": "tiny",
        "input": {"h": 4, "w": 4, "c": 2},
        "layers": [
            {"name": "c", "kind": "conv2d", "c_out": 3, "kernel": [1, 1],
             "requant_shift": 8,
             "weights": {"potq_b64": base64.b64encode(write_potq(qt)).decode()}},
        ],
    }
    x = np.arange(-16, 16, dtype=np.int8).tobytes()
    r = client.post("/run-model", json={
        "model_doc": doc, "method": "qkeras",
        "input_b64": base64.b64encode(x).decode(),
    })
    assert r.status_code == 200
    assert r.json()["report"]["layers"][0]["numeric_executed"] is True


def test_run_model_cpu_placement(client):
    r = client.post("/run-model", json={"fixture": "mobilenetv2", "placement": "cpu"})
    assert r.status_code == 200
    report = r.json()["report"]
    assert all(l["placement"] == "CPU" for l in report["layers"])
    assert report["totals"]["accel_time_ms"] == 0
