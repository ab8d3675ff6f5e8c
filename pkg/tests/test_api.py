"""
Integration tests for the HTTP API
"""
import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.main import app


@pytest.fixture(scope="module")
def client():
    """Client with the lifespan (cache warm-up) running"""
    with TestClient(app) as test_client:
        yield test_client


class TestInfo:
    def test_health(self, client):
        response = client.get("/api/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_presets(self, client):
        presets = client.get("/api/presets").json()
        assert [p["id"] for p in presets][:2] == ["A1", "A2"]
        assert presets[0]["experiments"] == 8


class TestConstants:
    """GET /api/constants"""

    def test_geometric(self, client):
        body = client.get("/api/constants", params={"pmf": "geometric:0.3"}).json()
        assert abs(body["s0"]["value"] - 1.0 / 1.4) < 1e-10
        assert body["regime"] == "NonFringe"

    def test_infinite_s0(self, client):
        body = client.get("/api/constants", params={"pmf": "det:0"}).json()
        assert body["s0"]["infinite"] is True
        assert abs(body["kappa0"] - 2.718281828) < 1e-6

    def test_bad_pmf(self, client):
        response = client.get("/api/constants", params={"pmf": "pmf:0.5,0.4"})
        assert response.status_code == 400
        assert "MassNotOne" in response.json()["detail"]


class TestRandomWalk:
    """GET /api/hitting and /api/profile"""

    def test_hitting(self, client):
        body = client.get("/api/hitting", params={"pmf": "geometric:0.5", "k": 2, "steps": 20}).json()
        assert len(body["q"]) == 2
        assert abs(body["q"][0][1] - 0.5) < 1e-15

    def test_profile(self, client):
        body = client.get("/api/profile", params={"pmf": "geometric:0.5", "t": 1.0}).json()
        assert abs(body["value"] - body["ode_value"]) < 1e-6

    def test_limits(self, client):
        assert client.get("/api/hitting", params={"pmf": "geometric:0.5", "steps": 10**6}).status_code == 400
        assert client.get("/api/profile", params={"pmf": "geometric:0.5", "t": -1.0}).status_code == 400


class TestGrow:
    """POST /api/grow"""

    def test_discrete(self, client):
        response = client.post("/api/grow", json={"pmf": "geometric:0.3", "n": 500, "seed": 7})
        assert response.status_code == 200
        body = response.json()
        assert body["n"] == 500
        assert sum(body["depth_profile"]) == 500
        assert body["martingale_w"] is None

    def test_continuous_has_martingale(self, client):
        body = client.post("/api/grow", json={"pmf": "geometric:0.3", "horizon": 3.0,
                                              "variant": "continuous"}).json()
        assert body["martingale_w"] > 0

    def test_invalid_config(self, client):
        response = client.post("/api/grow", json={"pmf": "geometric:0.3"})
        assert response.status_code == 422

    def test_too_large(self, client):
        response = client.post("/api/grow", json={"pmf": "geometric:0.3", "n": 10**7})
        assert response.status_code == 400


class TestExperiment:
    """POST /api/experiment"""

    def test_closed_form(self, client):
        response = client.post("/api/experiment", json={"kind": "ClosedFormConstants", "pmf": "srw:0.4"})
        assert response.status_code == 200
        assert response.json()["passed"] is True


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
