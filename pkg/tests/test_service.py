import numpy as np
import pytest
from fastapi.testclient import TestClient

from kalmanar import simulate
from kalmanar.service import create_app

from conftest import example1_params

GOLDEN = {"G": 1.0, "F": 1.0, "v": 1.0, "W": 1.0}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


class TestCoreEndpoints:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"

    def test_validate_reports_observability(self, client):
        r = client.post("/lds/validate", json={"lds": GOLDEN})
        assert r.status_code == 200
        assert r.json() == {"valid": True, "n": 1, "observable": True, "observability_rank": 1}

    def test_validate_config_error_maps_to_400(self, client):
        r = client.post("/lds/validate", json={"lds": {**GOLDEN, "v": -1.0}})
        assert r.status_code == 400
        body = r.json()
        assert body["error_kind"] == "config"
        assert "positive" in body["detail"]

    def test_malformed_body_maps_to_422(self, client):
        r = client.post("/lds/validate", json={"lds": {"G": 1.0}})
        assert r.status_code == 422

    def test_simulate_matches_library(self, client):
        r = client.post(
            "/lds/simulate",
            json={"lds": GOLDEN, "T": 5, "seed": 3, "include_states": True},
        )
        assert r.status_code == 200
        body = r.json()
        traj = simulate(example1_params(), 5, 3)  # different system: just shape checks
        assert len(body["observations"]) == 6
        assert body["csv"].startswith("t,y,phi_0\n")

    def test_steady_state_document(self, client):
        r = client.post("/kalman/steady-state", json={"lds": GOLDEN})
        assert r.status_code == 200
        body = r.json()
        assert set(body) == {"R", "Q", "A", "C", "Z", "gamma", "kappa", "iters", "residual"}
        assert body["R"][0][0] == pytest.approx((1 + np.sqrt(5)) / 2, abs=1e-10)

    def test_steady_state_numerical_error_maps_to_500(self, client):
        degenerate = {"G": 1.0, "F": 1.0, "v": 0.5, "W": 0.0}
        r = client.post(
            "/kalman/steady-state", json={"lds": degenerate, "tol": 1e-12, "max_iter": 10}
        )
        assert r.status_code == 500
        assert r.json()["error_kind"] == "numerical"

    def test_forecasts_align_with_filter(self, client):
        obs = [0.0, 1.0, 0.5, 2.0]
        r = client.post("/kalman/forecasts", json={"lds": GOLDEN, "observations": obs})
        body = r.json()
        assert body["start_t"] == 1
        assert len(body["forecasts"]) == 3
        assert body["forecasts"][0] == 0.0  # prior mean is zero by default

    def test_ar_coefficients(self, client):
        r = client.post("/ar/coefficients", json={"lds": GOLDEN, "s": 1})
        body = r.json()
        phi = (1 + np.sqrt(5)) / 2
        np.testing.assert_allclose(body["theta"], [1 / phi, 1 / phi**3], atol=1e-9)

    def test_ogd_run(self, client):
        r = client.post(
            "/ogd/run",
            json={"observations": [1.0, 1.0, 1.0, 1.0], "s": 1, "D": 10.0, "c": 1.0},
        )
        body = r.json()
        assert body["t"] == [1, 2, 3]
        assert body["loss"][0] == 1.0  # first prediction is 0


class TestExperimentEndpoints:
    def test_compare_returns_artifacts(self, client):
        r = client.post(
            "/experiments/compare", json={"name": "svc", "T": 30, "runs": 2, "depths": [1]}
        )
        assert r.status_code == 200
        names = [a["filename"] for a in r.json()["artifacts"]]
        assert names == [
            "compare.svc.csv",
            "compare.svc.manifest.json",
            "compare.svc.summary.json",
        ]

    def test_config_error_maps_to_400(self, client):
        r = client.post(
            "/experiments/compare", json={"name": "svc", "T": 5, "runs": 2, "depths": [9]}
        )
        assert r.status_code == 400
        assert r.json()["error_kind"] == "config"

    def test_unknown_field_rejected(self, client):
        r = client.post("/experiments/compare", json={"name": "svc", "bogus": 1})
        assert r.status_code == 422

    def test_ingest_endpoint(self, client):
        r = client.post(
            "/experiments/ingest",
            json={
                "name": "svc",
                "series": {"content": "1\n3\n6\n10\n", "column": 0, "differencing": 1},
            },
        )
        assert r.status_code == 200
        csv = r.json()["artifacts"][0]["content"]
        assert csv == "t,y\n0,2\n1,3\n2,4\n"

    def test_numerical_error_maps_to_exit_2_semantics(self, client):
        # a compare run whose Riccati solve cannot converge (W = 0)
        degenerate = {"G": 1.0, "F": 1.0, "v": 0.5, "W": 0.0}
        r = client.post(
            "/experiments/compare",
            json={"name": "svc", "lds": degenerate, "T": 30, "runs": 2, "depths": [1]},
        )
        assert r.status_code == 500
        assert r.json()["error_kind"] == "numerical"
