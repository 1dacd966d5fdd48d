import numpy as np
import pytest
from fastapi.testclient import TestClient

from spinconsensus.dynamics import run_trajectory
from spinconsensus.exact import transition_matrix_binomial
from spinconsensus.graphs import BinomialGraphSpec
from spinconsensus.service import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


class TestHealth:
    def test_ok(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"


class TestSimulate:
    def test_matches_core(self, client):
        payload = {
            "topology": {"kind": "binomial", "nodes": 10, "p": 0.5},
            "eta": 1.5,
            "steps": 40,
            "seed": 9,
            "init": "all-plus",
        }
        response = client.post("/simulate", json=payload)
        assert response.status_code == 200
        traj = run_trajectory(BinomialGraphSpec(10, 0.5), 1.5, "all-plus", 40, 9)
        assert response.json()["sums"] == traj.sums.tolist()

    def test_absorption_fields(self, client):
        payload = {
            "topology": {"kind": "ring", "nodes": 10},
            "eta": 0.75,
            "steps": 100000,
            "seed": 3,
        }
        body = client.post("/simulate", json=payload).json()
        assert body["absorbed_step"] is not None
        assert body["absorbed_sign"] in (-1, 1)
        assert body["sums"][-1] == body["absorbed_sign"] * 10

    def test_explicit_init_and_states(self, client):
        payload = {
            "topology": {"kind": "ring", "nodes": 4},
            "eta": 2.0,
            "steps": 5,
            "seed": 0,
            "init_values": [1, -1, 1, -1],
            "record_states": True,
        }
        body = client.post("/simulate", json=payload).json()
        assert body["init"] == "explicit"
        assert body["sums"][0] == 0
        assert len(body["states"]) == len(body["sums"])
        assert set(body["states"][0]) <= {"+", "-"}

    def test_rejects_bad_eta(self, client):
        payload = {"topology": {"kind": "ring", "nodes": 4}, "eta": 0, "steps": 5}
        assert client.post("/simulate", json=payload).status_code == 422

    def test_rejects_incomplete_topology(self, client):
        payload = {"topology": {"kind": "binomial", "nodes": 4}, "eta": 1.0, "steps": 5}
        assert client.post("/simulate", json=payload).status_code == 422


class TestEnsemble:
    def test_basic(self, client):
        payload = {
            "topology": {"kind": "binomial", "nodes": 8, "p": 0.5},
            "eta": 2.0,
            "steps": 10,
            "trials": 100,
            "seed": 1,
            "init": "all-plus",
        }
        body = client.post("/ensemble", json=payload).json()
        assert body["mean_sums"][0] == 8.0
        assert body["stderr_sums"][0] == 0.0
        assert len(body["mean_sums"]) == 11

    def test_budget_cap(self, client):
        payload = {
            "topology": {"kind": "binomial", "nodes": 8, "p": 0.5},
            "eta": 2.0,
            "steps": 1_000_000,
            "trials": 1_000,
            "seed": 1,
        }
        assert client.post("/ensemble", json=payload).status_code == 422


class TestDecay:
    def test_estimate(self, client):
        payload = {
            "topology": {"kind": "binomial", "nodes": 10, "p": 0.5},
            "eta": 1.5,
            "steps": 30,
            "trials": 400,
            "seed": 1,
        }
        body = client.post("/decay", json=payload).json()
        assert body["theoretical"] == pytest.approx(np.log(1.5))
        assert body["relative_error"] < 0.25
        assert body["p"] == 0.5

    def test_rejects_eta_at_most_one(self, client):
        payload = {
            "topology": {"kind": "binomial", "nodes": 10, "p": 0.5},
            "eta": 1.0,
            "steps": 30,
            "trials": 100,
        }
        assert client.post("/decay", json=payload).status_code == 422


class TestExact:
    def test_two_node_reference(self, client):
        payload = {
            "topology": {"kind": "binomial", "nodes": 2, "p": 0.5},
            "eta": 2.0,
            "verify": True,
        }
        body = client.post("/exact", json=payload).json()
        assert body["stationary"] == pytest.approx([7 / 26, 3 / 13, 3 / 13, 7 / 26], abs=1e-10)
        assert all(c["passed"] for c in body["checks"])
        expected = transition_matrix_binomial(2, 0.5, 2.0)
        assert np.max(np.abs(np.array(body["matrix"]) - expected)) < 1e-15

    def test_classification_absorbing_regime(self, client):
        payload = {"topology": {"kind": "ring", "nodes": 4}, "eta": 0.5}
        body = client.post("/exact", json=payload).json()
        assert body["classification"]["absorbing"] == [0, 15]
        assert len(body["classification"]["transient"]) == 14
        assert body["stationary"] is None
        assert "absorbing" in body["stationary_error"]

    def test_matrix_opt_out(self, client):
        payload = {"topology": {"kind": "ring", "nodes": 4}, "eta": 0.5, "include_matrix": False}
        assert client.post("/exact", json=payload).json()["matrix"] is None

    def test_service_cap(self, client):
        payload = {"topology": {"kind": "ring", "nodes": 12}, "eta": 2.0}
        response = client.post("/exact", json=payload)
        assert response.status_code == 400
        assert "cap" in response.json()["detail"]


class TestSweep:
    def test_agreement_grid(self, client):
        payload = {
            "topology": {"kind": "ring", "nodes": 16},
            "etas": [0.6, 1.4],
            "metric": "agreement_fraction",
            "steps": 20000,
            "trials": 10,
            "seed": 3,
        }
        body = client.post("/sweep", json=payload).json()
        values = {p["eta"]: p["value"] for p in body["points"]}
        assert values[0.6] >= 0.9
        assert values[1.4] <= 0.1

    def test_p_grid_requires_binomial(self, client):
        payload = {
            "topology": {"kind": "ring", "nodes": 8},
            "etas": [2.0],
            "ps": [0.2, 0.8],
            "metric": "final_time_average",
            "steps": 100,
            "trials": 1,
        }
        assert client.post("/sweep", json=payload).status_code == 422
