"""HTTP contract: schemas, status codes, and capability discovery."""
import base64
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from fastapi.testclient import TestClient
from jsonschema import Draft202012Validator

from facodec_service import StubFacodecModel, create_app, schemas
from facodec_service.wav import decode, encode_float32
from facodec_service.wire import encode_block

from conftest import wait_ready

INFO_SCHEMA = Draft202012Validator(schemas.load("service_info"))
FACTORS_SCHEMA = Draft202012Validator(schemas.load("factorized_speech"))
ERROR_SCHEMA = Draft202012Validator(schemas.load("error"))


def make_client(**kwargs):
    return TestClient(create_app(model_factory=StubFacodecModel, **kwargs))


class TestHealth:
    def test_schema_and_stability(self, client):
        first = client.get("/health")
        second = client.get("/health")
        assert first.status_code == 200
        INFO_SCHEMA.validate(first.json())
        assert first.content == second.content

    def test_reports_loaded_model_capabilities(self, client):
        info = client.get("/health").json()
        assert info["backend_id"] == "facodec-stub-v1"
        assert info["model_revision"] == "stub-0"
        assert info["sample_rate"] == 16000
        assert info["frame_shift_s"] == pytest.approx(0.01)
        assert info["deterministic"] is True
        assert info["dims"] == {"prosody": 5, "content": 11,
                                "speaker": 7, "residual": 9}

    def test_unknown_route_is_404(self, client):
        assert client.get("/v1/nope").status_code == 404


class TestDisentangle:
    def test_contract(self, client, fixture_bytes):
        resp = client.post("/v1/disentangle",
                           content=fixture_bytes("disentangle_request.wav"),
                           headers={"Content-Type": "audio/wav"})
        assert resp.status_code == 200
        body = resp.json()
        FACTORS_SCHEMA.validate(body)
        info = client.get("/health").json()
        assert body["dims"] == info["dims"]
        assert body["T"] == 48
        for name, rows in (("prosody", 48), ("content", 48),
                           ("residual", 48), ("speaker", 1)):
            raw = base64.b64decode(body[name])
            assert len(raw) == 4 * rows * body["dims"][name]
        speaker = np.frombuffer(base64.b64decode(body["speaker"]), dtype="<f4")
        assert np.linalg.norm(speaker.astype(np.float64)) == pytest.approx(1.0, abs=1e-6)

    def test_same_bytes_twice_is_byte_identical(self, client, fixture_bytes):
        wav = fixture_bytes("disentangle_request.wav")
        a = client.post("/v1/disentangle", content=wav)
        b = client.post("/v1/disentangle", content=wav)
        assert a.content == b.content

    def test_resamples_foreign_rates(self, client):
        x = 0.3 * np.sin(np.arange(4000) * (2 * np.pi * 220 / 8000))
        resp = client.post("/v1/disentangle", content=encode_float32(x, 8000))
        assert resp.status_code == 200
        assert resp.json()["T"] == 48  # 0.5 s regardless of source rate

    def test_empty_body_400(self, client):
        resp = client.post("/v1/disentangle", content=b"")
        assert resp.status_code == 400
        assert "empty" in resp.json()["detail"]

    def test_undecodable_400(self, client):
        resp = client.post("/v1/disentangle", content=b"\x89PNG not audio")
        assert resp.status_code == 400

    def test_too_short_400(self, client):
        resp = client.post("/v1/disentangle",
                           content=encode_float32(np.ones(200) * 0.1, 16000))
        assert resp.status_code == 400
        assert "too short" in resp.json()["detail"]

    def test_over_duration_limit_413(self):
        with make_client(max_audio_s=0.5) as client:
            wait_ready(client)
            x = 0.1 * np.ones(9600)  # 0.6 s at 16 kHz
            resp = client.post("/v1/disentangle", content=encode_float32(x, 16000))
            assert resp.status_code == 413
            assert "0.5 s limit" in resp.json()["detail"]


class TestSynthesize:
    def test_contract(self, client, fixture_bytes):
        request = fixture_bytes("synthesize_request.json")
        resp = client.post("/v1/synthesize", content=request,
                           headers={"Content-Type": "application/json"})
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "audio/wav"
        samples, rate = decode(resp.content)
        assert rate == 16000
        assert samples.size == json.loads(request)["T"] * 160 + 240

    def test_not_json_400(self, client):
        resp = client.post("/v1/synthesize", content=b"{nope")
        assert resp.status_code == 400
        assert "not JSON" in resp.json()["detail"]

    def test_non_object_400(self, client):
        resp = client.post("/v1/synthesize", content=b"[]")
        assert resp.status_code == 400
        assert "schema violation" in resp.json()["detail"]

    def test_missing_block_400(self, client, fixture_bytes):
        body = json.loads(fixture_bytes("synthesize_request.json"))
        del body["content"]
        resp = client.post("/v1/synthesize", json=body)
        assert resp.status_code == 400
        assert "schema violation" in resp.json()["detail"]

    def test_dims_off_by_one_400(self, client, fixture_bytes):
        body = json.loads(fixture_bytes("synthesize_request.json"))
        body["dims"]["prosody"] += 1
        resp = client.post("/v1/synthesize", json=body)
        assert resp.status_code == 400
        assert "dims mismatch" in resp.json()["detail"]

    def test_invalid_base64_400(self, client, fixture_bytes):
        body = json.loads(fixture_bytes("synthesize_request.json"))
        body["prosody"] = "!not base64!"
        resp = client.post("/v1/synthesize", json=body)
        assert resp.status_code == 400

    def test_wrong_block_size_400(self, client, fixture_bytes):
        body = json.loads(fixture_bytes("synthesize_request.json"))
        body["T"] += 1
        resp = client.post("/v1/synthesize", json=body)
        assert resp.status_code == 400
        assert "expected" in resp.json()["detail"]

    def test_nan_block_422(self, client, fixture_bytes):
        body = json.loads(fixture_bytes("synthesize_request.json"))
        body["prosody"] = encode_block(np.full((body["T"], 5), np.nan))
        resp = client.post("/v1/synthesize", json=body)
        assert resp.status_code == 422
        assert "non-finite" in resp.json()["detail"]

    def test_infinite_speaker_422(self, client, fixture_bytes):
        body = json.loads(fixture_bytes("synthesize_request.json"))
        body["speaker"] = encode_block(np.full((1, 7), np.inf))
        resp = client.post("/v1/synthesize", json=body)
        assert resp.status_code == 422


class TestConvert:
    def _files(self, fixture_bytes):
        return {
            "source": ("source.wav", fixture_bytes("convert_source.wav"), "audio/wav"),
            "speaker_ref": ("speaker_ref.wav", fixture_bytes("convert_ref.wav"), "audio/wav"),
        }

    def test_contract(self, client, fixture_bytes):
        resp = client.post("/v1/convert", files=self._files(fixture_bytes))
        assert resp.status_code == 200
        samples, rate = decode(resp.content)
        assert rate == 16000
        # source is 6400 samples -> 38 frames
        assert samples.size == 38 * 160 + 240

    @pytest.mark.parametrize("keep", ["source", "speaker_ref"])
    def test_missing_part_400(self, client, fixture_bytes, keep):
        files = {keep: self._files(fixture_bytes)[keep]}
        resp = client.post("/v1/convert", files=files)
        assert resp.status_code == 400
        assert "missing multipart file part" in resp.json()["detail"]

    def test_text_field_is_not_a_file_400(self, client):
        resp = client.post("/v1/convert", data={"source": "x", "speaker_ref": "y"})
        assert resp.status_code == 400

    def test_malformed_multipart_400(self, client):
        resp = client.post(
            "/v1/convert", content=b"\x00\x01garbage",
            headers={"Content-Type": "multipart/form-data; boundary=xyz"})
        assert resp.status_code == 400
        assert "multipart" in resp.json()["detail"]

    def test_undecodable_source_400(self, client, fixture_bytes):
        files = self._files(fixture_bytes)
        files["source"] = ("source.wav", b"not audio", "audio/wav")
        resp = client.post("/v1/convert", files=files)
        assert resp.status_code == 400

    def test_over_duration_limit_413(self, fixture_bytes):
        with make_client(max_audio_s=0.3) as client:
            wait_ready(client)
            files = {
                "source": ("source.wav", fixture_bytes("convert_source.wav"),
                           "audio/wav"),
                "speaker_ref": ("speaker_ref.wav", fixture_bytes("convert_ref.wav"),
                                "audio/wav"),
            }
            assert client.post("/v1/convert", files=files).status_code == 413


class TestErrorShape:
    def test_error_bodies_validate(self, client, fixture_bytes):
        responses = [
            client.get("/v1/nope"),
            client.post("/v1/disentangle", content=b""),
            client.post("/v1/synthesize", content=b"[]"),
            client.post("/v1/convert", data={}),
        ]
        for resp in responses:
            assert resp.status_code != 200
            ERROR_SCHEMA.validate(resp.json())


class TestLifecycle:
    def test_503_while_loading_then_ready(self):
        gate = threading.Event()

        def slow_factory():
            gate.wait(5.0)
            return StubFacodecModel()

        with TestClient(create_app(model_factory=slow_factory)) as client:
            resp = client.get("/health")
            assert resp.status_code == 503
            assert "loading" in resp.json()["detail"]
            assert client.post("/v1/disentangle", content=b"x").status_code == 503
            gate.set()
            assert wait_ready(client).status_code == 200

    def test_500_when_model_fails_to_load(self):
        def broken_factory():
            raise RuntimeError("weights corrupt")

        with TestClient(create_app(model_factory=broken_factory)) as client:
            deadline = time.monotonic() + 5.0
            while time.monotonic() < deadline:
                resp = client.get("/health")
                if resp.status_code != 503:
                    break
                time.sleep(0.005)
            assert resp.status_code == 500
            assert "weights corrupt" in resp.json()["detail"]

    def test_slow_inference_times_out_504(self, fixture_bytes):
        class SlowModel(StubFacodecModel):
            def analyze(self, samples):
                time.sleep(0.4)
                return super().analyze(samples)

        with TestClient(create_app(model_factory=SlowModel,
                                   request_timeout_s=0.05)) as client:
            wait_ready(client)
            resp = client.post("/v1/disentangle",
                               content=fixture_bytes("disentangle_request.wav"))
            assert resp.status_code == 504

    def test_concurrent_requests_all_served_identically(self, client, fixture_bytes):
        wav = fixture_bytes("disentangle_request.wav")

        def hit(_):
            return client.post("/v1/disentangle", content=wav)

        with ThreadPoolExecutor(max_workers=4) as pool:
            responses = list(pool.map(hit, range(4)))
        assert all(r.status_code == 200 for r in responses)
        assert len({r.content for r in responses}) == 1
