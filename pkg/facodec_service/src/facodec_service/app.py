"""FastAPI application wrapping one codec model instance.

The model loads in a background thread so the service comes up
immediately and answers 503 until loading finishes. All inference runs
on a single-worker executor: requests queue behind each other, which is
the whole concurrency story for a one-model process. Every queued job
is bounded by a request timeout that maps to 504.
"""
from __future__ import annotations

import asyncio
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from jsonschema import Draft202012Validator

from . import schemas, wav, wire
from .model import BLOCK_NAMES, ModelError, load_model

DEFAULT_MAX_AUDIO_S = 30.0
DEFAULT_TIMEOUT_S = 120.0


class _ServiceState:
    def __init__(self, model_factory, max_audio_s, request_timeout_s):
        self.model_factory = model_factory
        self.max_audio_s = max_audio_s
        self.request_timeout_s = request_timeout_s
        self.model = None
        self.load_error: BaseException | None = None
        self.loaded = threading.Event()
        self.jobs = ThreadPoolExecutor(max_workers=1)
        self.request_schema = Draft202012Validator(schemas.load("factorized_speech"))

    def load(self):
        try:
            self.model = self.model_factory()
        except BaseException as exc:
            self.load_error = exc
        finally:
            self.loaded.set()

    def require_model(self):
        if not self.loaded.is_set():
            raise HTTPException(503, "model is loading")
        if self.load_error is not None:
            raise HTTPException(500, f"model failed to load: {self.load_error}")
        return self.model


def _json_response(payload: dict, status_code: int = 200) -> Response:
    # stable key order and layout: responses are byte-reproducible and
    # diffable as golden fixtures
    body = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    return Response(body, status_code=status_code, media_type="application/json")


def _wav_response(samples: np.ndarray, rate: int) -> Response:
    return Response(wav.encode_float32(samples, rate), media_type="audio/wav")


def _service_info(model) -> dict:
    return {
        "backend_id": model.backend_id,
        "model_revision": model.model_revision,
        "sample_rate": int(model.sample_rate),
        "frame_shift_s": float(model.frame_shift_s),
        "deterministic": bool(model.deterministic),
        "dims": {name: int(model.dims[name]) for name in BLOCK_NAMES},
    }


def create_app(model_factory=load_model, *, max_audio_s: float = DEFAULT_MAX_AUDIO_S,
               request_timeout_s: float = DEFAULT_TIMEOUT_S) -> FastAPI:
    state = _ServiceState(model_factory, max_audio_s, request_timeout_s)

    @asynccontextmanager
    async def lifespan(app):
        threading.Thread(target=state.load, daemon=True).start()
        yield
        state.jobs.shutdown(wait=False, cancel_futures=True)

    app = FastAPI(title="facodec-service", lifespan=lifespan)
    app.state.service = state

    async def run_job(fn):
        # one worker = one model = an implicit FIFO queue of requests
        future = state.jobs.submit(fn)
        try:
            return await asyncio.wait_for(
                asyncio.wrap_future(future), timeout=state.request_timeout_s)
        except asyncio.TimeoutError:
            raise HTTPException(504, "inference timed out") from None

    def decode_audio(body: bytes, model) -> np.ndarray:
        if not body:
            raise HTTPException(400, "empty request body")
        try:
            samples, rate = wav.decode(body)
        except wav.WavDecodeError as exc:
            raise HTTPException(400, str(exc)) from exc
        if samples.size / rate > state.max_audio_s:
            raise HTTPException(
                413, f"audio exceeds the {state.max_audio_s:g} s limit")
        return wav.resample(samples, rate, model.sample_rate)

    @app.get("/health")
    async def health():
        model = state.require_model()
        return _json_response(_service_info(model))

    @app.post("/v1/disentangle")
    async def disentangle(request: Request):
        model = state.require_model()
        body = await request.body()
        samples = decode_audio(body, model)
        try:
            blocks = await run_job(lambda: model.analyze(samples))
        except ModelError as exc:
            raise HTTPException(400, str(exc)) from exc
        return _json_response(wire.factorized_payload(blocks, model.dims))

    @app.post("/v1/synthesize")
    async def synthesize(request: Request):
        model = state.require_model()
        raw = await request.body()
        try:
            body = json.loads(raw)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise HTTPException(400, f"request body is not JSON: {exc}") from exc
        error = next(iter(state.request_schema.iter_errors(body)), None)
        if error is not None:
            raise HTTPException(400, f"schema violation: {error.message[:200]}")
        try:
            blocks = wire.parse_factorized(body, model.dims)
        except wire.WireError as exc:
            raise HTTPException(400, str(exc)) from exc
        for name in BLOCK_NAMES:
            if not np.all(np.isfinite(blocks[name])):
                raise HTTPException(422, f"{name} block contains non-finite values")
        samples = await run_job(lambda: model.synthesize(
            blocks["prosody"], blocks["content"], blocks["residual"],
            blocks["speaker"]))
        return _wav_response(samples, model.sample_rate)

    @app.post("/v1/convert")
    async def convert(request: Request):
        model = state.require_model()
        try:
            form = await request.form()
        except HTTPException:
            raise
        except Exception as exc:  # parser rejected the multipart framing
            raise HTTPException(400, f"unreadable multipart body: {exc}") from exc
        parts = {}
        for name in ("source", "speaker_ref"):
            upload = form.get(name)
            if upload is None or isinstance(upload, str):
                raise HTTPException(400, f"missing multipart file part {name!r}")
            parts[name] = decode_audio(await upload.read(), model)

        def job():
            src = model.analyze(parts["source"])
            ref = model.analyze(parts["speaker_ref"])
            # one-call convenience must equal the disentangle -> swap ->
            # synthesize composition bit-for-bit, and that path rounds
            # every block through the float32 wire between stages
            return model.synthesize(
                wire.wire_cast(src["prosody"]), wire.wire_cast(src["content"]),
                wire.wire_cast(src["residual"]), wire.wire_cast(ref["speaker"]))

        try:
            samples = await run_job(job)
        except ModelError as exc:
            raise HTTPException(400, str(exc)) from exc
        return _wav_response(samples, model.sample_rate)

    return app
