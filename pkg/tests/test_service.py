"""Editor service tests over the HTTP interface."""

import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from reenact.facemodel import GAZE_BOUND, synthesize_basis
from reenact.fitting import default_init
from reenact.nn.models import DiscriminatorConfig, GeneratorConfig
from reenact.nn.train import initialize
from reenact.render import default_intrinsics
from reenact.service import EditorService, create_app, replay_log


@pytest.fixture(scope="module")
def service_basis():
    return synthesize_basis(seed=11, vertex_count=170, dims=(8, 8, 6))


def make_service(basis, tmp_path=None, weights=None, window_size=1):
    cam = default_intrinsics(16, 16)
    init = default_init(basis, cam)
    log = (tmp_path / "requests.jsonl") if tmp_path else None
    return EditorService(basis, cam, init, weights, window_size, log)


def make_weights():
    gen = GeneratorConfig(input_size=16, in_channels=9,
                          down_channels=(8, 8, 8, 8), up_channels=(8, 8, 8, 3),
                          dropout_probs=(0.0, 0.0, 0.0, 0.0))
    disc = DiscriminatorConfig(input_size=16, in_channels=12, block_channels=(8, 8))
    return initialize(gen, disc, seed=0)


class TestState:
    def test_initial_state(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        state = client.get("/v1/state").json()
        assert state["seq"] == 0
        assert state["bounds"]["dims"] == [8, 8, 6]
        assert abs(state["bounds"]["gaze"] - GAZE_BOUND) < 1e-12
        assert len(state["params"]["rotation"]) == 4

    def test_meta(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        meta = client.get("/v1/meta").json()
        assert meta["resolution"] == [16, 16]
        assert meta["window_size"] == 1
        assert meta["dims"] == [8, 8, 6]
        assert meta["has_weights"] is False


class TestEdit:
    def test_zero_deltas_leave_state_unchanged(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        before = client.get("/v1/state").json()["params"]
        after = client.post("/v1/edit", json={}).json()
        assert after["params"] == before
        assert after["warnings"] == []

    def test_translation_edit(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        before = client.get("/v1/state").json()["params"]["translation"]
        state = client.post("/v1/edit",
                            json={"translation": [0.1, 0.0, 0.0]}).json()
        assert state["seq"] == 1
        got = state["params"]["translation"]
        assert abs(got[0] - (before[0] + 0.1)) < 1e-12

    def test_gaze_clamp_warning(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        state = client.post("/v1/edit", json={"gaze": [2.0, 0, 0, 0]}).json()
        assert any("clamped" in w for w in state["warnings"])
        assert abs(state["params"]["gaze"][0] - GAZE_BOUND) < 1e-12

    def test_client_seq_echoed(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        state = client.post("/v1/edit", json={"client_seq": 42}).json()
        assert state["client_seq"] == 42

    def test_unknown_field_is_400(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        resp = client.post("/v1/edit", json={"wobble": [1.0]})
        assert resp.status_code == 400
        body = resp.json()
        assert body["error"]["field"] == "wobble"

    def test_wrong_length_is_400(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        resp = client.post("/v1/edit", json={"gaze": [1.0, 2.0]})
        assert resp.status_code == 400
        assert resp.json()["error"]["field"] == "gaze"

    def test_non_numeric_is_400(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        resp = client.post("/v1/edit", json={"translation": ["a", "b", "c"]})
        assert resp.status_code == 400

    def test_failed_edit_preserves_state(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        client.post("/v1/edit", json={"translation": [0.1, 0, 0]})
        before = client.get("/v1/state").json()
        client.post("/v1/edit", json={"translation": [1, 2]})
        after = client.get("/v1/state").json()
        assert after == before


class TestReset:
    def test_reset_restores_initial(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        initial = client.get("/v1/state").json()["params"]
        client.post("/v1/edit", json={"translation": [0.2, 0.1, 0.0],
                                      "expression": [0.1, 0, 0, 0, 0, 0]})
        state = client.post("/v1/reset").json()
        assert state["params"] == initial
        assert state["seq"] == 2


class TestFrames:
    def test_conditioning_frame_png(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        resp = client.get("/v1/frame", params={"mode": "conditioning"})
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.headers["X-State-Seq"] == "0"
        img = Image.open(io.BytesIO(resp.content))
        assert img.size == (16, 16)

    def test_frame_reflects_edits(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        before = client.get("/v1/frame", params={"mode": "conditioning"}).content
        client.post("/v1/edit", json={"translation": [0.3, 0.0, 0.0]})
        after = client.get("/v1/frame", params={"mode": "conditioning"})
        assert after.headers["X-State-Seq"] == "1"
        assert after.content != before

    def test_output_without_weights_is_404(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        resp = client.get("/v1/frame", params={"mode": "output"})
        assert resp.status_code == 404

    def test_output_with_weights(self, service_basis):
        service = make_service(service_basis, weights=make_weights())
        client = TestClient(create_app(service))
        resp = client.get("/v1/frame", params={"mode": "output"})
        assert resp.status_code == 200
        img = Image.open(io.BytesIO(resp.content))
        assert img.size == (16, 16)

    def test_bad_mode_is_400(self, service_basis):
        client = TestClient(create_app(make_service(service_basis)))
        resp = client.get("/v1/frame", params={"mode": "wireframe"})
        assert resp.status_code == 400


class TestReplay:
    def test_log_replay_matches_live_state(self, service_basis, tmp_path):
        service = make_service(service_basis, tmp_path=tmp_path)
        client = TestClient(create_app(service))
        client.post("/v1/edit", json={"translation": [0.1, -0.05, 0.0]})
        client.post("/v1/edit", json={"rotation": [0.0, 0.2, 0.0],
                                      "gaze": [0.1, 0.0, -0.1, 0.0]})
        client.post("/v1/reset")
        client.post("/v1/edit", json={"expression": [0.2, 0, 0, 0, 0, 0.1]})
        live = client.get("/v1/state").json()["params"]
        replayed = replay_log(service.initial, tmp_path / "requests.jsonl")
        for key, value in replayed.to_dict().items():
            np.testing.assert_allclose(live[key], value, atol=1e-15, err_msg=key)
