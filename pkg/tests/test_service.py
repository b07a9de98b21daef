import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from isofam.charts import chart_to_dict
from isofam.catalog import catalog_get, catalog_labels
from isofam.service.app import app

client = TestClient(app)


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_catalog_endpoints():
    r = client.get("/catalog")
    assert r.status_code == 200
    labels = [e["label"] for e in r.json()["entries"]]
    assert labels == catalog_labels()
    r = client.get("/catalog/equilateral-s5")
    entry = r.json()["entries"][0]
    assert entry["expected"]["ranks"] == [2, 1]
    assert "definition" in entry
    r = client.get("/catalog/nope")
    assert r.status_code == 400


def test_analyze_endpoint_and_determinism():
    req = {"chart": {"label": "equilateral-s5"}, "grid": 16}
    r1 = client.post("/analyze", json=req)
    r2 = client.post("/analyze", json=req)
    assert r1.status_code == 200
    assert r1.content == r2.content  # byte-identical reports
    body = r1.json()
    assert body["status"] == "ok"
    assert body["summary"]["isotropic"] is True
    assert body["summary"]["rank_pattern"] == [2, 1]
    assert body["config"] == {"chart": "equilateral-s5", "grid": 16,
                              "rank_tol": 1e-7, "circ_tol": 1e-6}
    assert body["csv"].splitlines()[0].startswith("u,v,rank_1")


def test_analyze_inline_definition():
    definition = chart_to_dict(catalog_get("holo-r4").chart)
    r = client.post("/analyze", json={"chart": {"definition": definition}, "grid": 12})
    assert r.status_code == 200
    assert r.json()["summary"]["isotropic"] is True


def test_analyze_rejected_nonminimal_is_data():
    r = client.post("/analyze", json={"chart": {"label": "perturbed-nonminimal"}, "grid": 12})
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "rejected-nonminimal"
    assert body["diagnostic"]["trace_norm"] > 0.1


def test_request_validation():
    assert client.post("/analyze", json={"chart": {"label": "clifford-s3"}, "grid": 4}).status_code == 422
    assert client.post("/analyze", json={"chart": {}, "grid": 16}).status_code == 422
    assert client.post(
        "/analyze", json={"chart": {"label": "a", "definition": {"x": 1}}, "grid": 16}
    ).status_code == 422
    assert client.post("/analyze", json={"chart": {"label": "missing"}, "grid": 16}).status_code == 400


def test_family_endpoint():
    r = client.post("/family", json={
        "chart": {"label": "clifford-s3"}, "grid": 24,
        "thetas": [0.0, 0.5], "include_points": True,
    })
    assert r.status_code == 200
    body = r.json()
    members = body["members"]
    assert members[0]["congruence_residual_to_base"] < 1e-5
    assert members[1]["isometry_deviation"] < 1e-4
    assert set(body["points_csv"]) == {"0.000000", "0.500000"}
    header = body["points_csv"]["0.000000"].splitlines()[0]
    assert header == "u,v,x0,x1,x2,x3"


def test_moduli_endpoint_and_precondition():
    r = client.post("/moduli", json={"chart": {"label": "clifford-s3"}, "steps": 60,
                                     "path_steps": 128})
    assert r.status_code == 200
    rep = r.json()["report"]
    assert rep["classification"] == "finite"
    assert rep["detected_thetas"] == [0.0]
    assert rep["congruence_classes"] == [[0.0]]
    assert len(rep["theta_grid"]) == 60
    assert len(rep["distance_curves"]) == 2  # one curve per generator
    r = client.post("/moduli", json={"chart": {"label": "holo-r4"}, "steps": 16})
    assert r.status_code == 400  # not periodic


def test_polar_endpoint():
    r = client.post("/polar", json={"chart": {"label": "equilateral-s5"}, "grid": 16})
    assert r.status_code == 200
    s = r.json()["summary"]
    assert s["max_conformality_dev"] < 1e-6
    assert s["polar_isotropy_max_dev"] < 1e-6
    r = client.post("/polar", json={"chart": {"label": "holo-r4"}, "grid": 16})
    assert r.status_code == 400


def test_congruence_endpoint():
    r = client.post("/congruence", json={
        "chart_a": {"label": "veronese-s4"}, "theta": 1.0, "grid": 48,
    })
    assert r.status_code == 200
    res = r.json()["result"]
    assert res["residual_rms"] < 1e-5
    assert res["verdict"] in ("congruent", "noncongruent")
    # same chart against itself through a definition copy
    definition = chart_to_dict(catalog_get("veronese-s4").chart)
    r = client.post("/congruence", json={
        "chart_a": {"label": "veronese-s4"}, "chart_b": {"definition": definition}, "grid": 16,
    })
    assert r.json()["result"]["residual_rms"] < 1e-12
    # exactly one target required
    assert client.post("/congruence", json={
        "chart_a": {"label": "veronese-s4"}, "grid": 16,
    }).status_code == 422


def test_check_endpoint_single_chart():
    r = client.post("/check", json={"charts": ["holo-r4"], "grid": 16, "family_grid": 24})
    assert r.status_code == 200
    body = r.json()
    assert body["passed"] is True
    names = {row["name"] for row in body["rows"]}
    assert "fact2-even-codim-congruent" in names
    assert all(row["chart"] == "holo-r4" for row in body["rows"])


def test_reports_json_serializable_and_sorted():
    r = client.post("/analyze", json={"chart": {"label": "clifford-s3"}, "grid": 12})
    text = json.dumps(r.json(), sort_keys=True)
    assert "NaN" not in text  # masked entries serialize as null
    assert np.isfinite(r.json()["summary"]["max_dev"])
