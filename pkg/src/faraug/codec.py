"""Subspace speech codec: factorize, substitute the speaker block, resynthesize.

A FactorizedSpeech splits per-frame features into prosody / content /
speaker / residual blocks. The toy backend is an exactly invertible linear
transform: disjoint hop-sized sample blocks go through an orthonormal
DCT-II; the first 80 coefficients are rotated by a fixed seeded orthogonal
matrix and split [8 | 32 | 16 | 24]; the upper 80 coefficients and the
window-minus-hop tail ride along as bookkeeping so synthesis is the exact
inverse up to the speaker-block time-averaging loss. The remote backend
speaks the same contracts over HTTP.
"""
from __future__ import annotations

import base64
import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
import requests
from scipy.fft import dct, idct

from .audio import Waveform, resample
from .features import frame_count, frame_geometry

BLOCK_DIMS = (8, 32, 16, 24)
TOY_ROTATION_SEED = 0xFAC0DEC

_FSPC_MAGIC = b"FSPC1"
_UNIT_TOL = 1e-9


class CodecError(Exception):
    """Base class for codec failures."""


class CodecServiceError(CodecError):
    """Remote codec backend is unreachable or returned an error."""


@dataclass
class FactorizedSpeech:
    """Disentangled utterance representation.

    prosody (T, D_p), content (T, D_c), residual (T, D_r) are per-frame;
    speaker (D_s,) is utterance-level and unit-norm. aux carries backend
    bookkeeping (never serialized); for the toy backend that is the upper
    DCT coefficients, the tail samples, and the speaker-block scale.
    """

    prosody: np.ndarray
    content: np.ndarray
    speaker: np.ndarray
    residual: np.ndarray
    frame_shift_s: float
    sample_rate: int
    backend_id: str
    aux: dict = field(default_factory=dict, repr=False)

    @property
    def n_frames(self) -> int:
        return int(self.prosody.shape[0])

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.prosody.shape[1], self.content.shape[1],
                self.speaker.shape[0], self.residual.shape[1])

    def validate(self) -> None:
        t = self.prosody.shape[0]
        if self.content.shape[0] != t or self.residual.shape[0] != t:
            raise ValueError("per-frame blocks disagree on frame count")
        if self.speaker.ndim != 1:
            raise ValueError("speaker block must be a single utterance-level vector")
        for name in ("prosody", "content", "speaker", "residual"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} block contains non-finite values")


@runtime_checkable
class CodecBackend(Protocol):
    backend_id: str
    sample_rate: int
    dims: tuple[int, int, int, int]

    def disentangle(self, w: Waveform) -> FactorizedSpeech: ...

    def synthesize(self, f: FactorizedSpeech) -> Waveform: ...


def _normalize_speaker(vec: np.ndarray) -> np.ndarray:
    """Unit-normalize, preserving bits when the input is already unit-norm."""
    vec = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("speaker vector has zero norm")
    if abs(norm - 1.0) <= _UNIT_TOL:
        return vec.copy()
    return vec / norm


def _toy_rotation() -> np.ndarray:
    """Fixed 80x80 orthogonal rotation: sign-fixed QR of a seeded matrix."""
    rng = np.random.default_rng(TOY_ROTATION_SEED)
    q, r = np.linalg.qr(rng.standard_normal((80, 80)))
    return q * np.sign(np.diag(r))


class ToyCodecBackend:
    """Deterministic model-free codec used throughout the test pipeline.

    Synthesis is linear in the blocks and bookkeeping: the round-trip error
    equals the time variance of the speaker-block coordinates, utterances
    with time-constant speaker coordinates reconstruct exactly, and
    re-analysis of a synthesized waveform reproduces the blocks to machine
    precision because analysis blocks are disjoint in time.
    """

    backend_id = "toy-dct16k-v1"
    sample_rate = 16000
    dims = BLOCK_DIMS

    def __init__(self) -> None:
        self._rotation = _toy_rotation()
        self._win, self._hop, _ = frame_geometry(self.sample_rate)

    def disentangle(self, w: Waveform) -> FactorizedSpeech:
        if w.sample_rate != self.sample_rate:
            w = resample(w, self.sample_rate)
        t = frame_count(len(w), self._win, self._hop)
        if t < 1:
            raise ValueError(
                f"waveform too short to factorize: {len(w)} samples < one "
                f"{self._win}-sample frame"
            )
        core = w.samples[: t * self._hop].reshape(t, self._hop)
        coeffs = dct(core, type=2, norm="ortho", axis=1)
        rotated = coeffs[:, :80] @ self._rotation.T

        d_p, d_c, d_s, d_r = self.dims
        prosody = rotated[:, :d_p].copy()
        content = rotated[:, d_p : d_p + d_c].copy()
        spk_frames = rotated[:, d_p + d_c : d_p + d_c + d_s]
        residual = rotated[:, d_p + d_c + d_s :].copy()

        spk_mean = spk_frames.mean(axis=0)
        scale = float(np.linalg.norm(spk_mean))
        if scale == 0.0:
            raise ValueError(
                "speaker-block coordinates average to zero; cannot extract a "
                "speaker vector from this signal"
            )
        tail = w.samples[t * self._hop : t * self._hop + (self._win - self._hop)]
        aux = {
            "detail": coeffs[:, 80:].copy(),
            "tail": tail.copy(),
            "speaker_scale": np.float64(scale),
        }
        return FactorizedSpeech(
            prosody=prosody,
            content=content,
            speaker=spk_mean / scale,
            residual=residual,
            frame_shift_s=self._hop / self.sample_rate,
            sample_rate=self.sample_rate,
            backend_id=self.backend_id,
            aux=aux,
        )

    def synthesize(self, f: FactorizedSpeech) -> Waveform:
        f.validate()
        if f.dims != self.dims:
            raise ValueError(f"block dims {f.dims} do not match backend dims {self.dims}")
        t = f.n_frames
        scale = float(f.aux.get("speaker_scale", 1.0))
        spk_rows = np.broadcast_to(f.speaker * scale, (t, self.dims[2]))
        rotated = np.concatenate([f.prosody, f.content, spk_rows, f.residual], axis=1)
        coeffs = np.empty((t, self._hop), dtype=np.float64)
        coeffs[:, :80] = rotated @ self._rotation
        coeffs[:, 80:] = f.aux.get("detail", 0.0)
        core = idct(coeffs, type=2, norm="ortho", axis=1).reshape(-1)
        tail = np.asarray(f.aux.get("tail", np.zeros(self._win - self._hop)))
        samples = np.concatenate([core, tail])
        return Waveform(samples, self.sample_rate)


def convert_speaker(f: FactorizedSpeech, spk_tgt: np.ndarray) -> FactorizedSpeech:
    """Swap in a target speaker vector; every other block is untouched.

    The target is unit-normalized on entry (bit-preserving when already
    unit-norm, so self-conversion is an exact identity).
    """
    spk_tgt = np.asarray(spk_tgt, dtype=np.float64)
    if spk_tgt.shape != f.speaker.shape:
        raise ValueError(
            f"speaker dim mismatch: target {spk_tgt.shape[0]}, "
            f"representation {f.speaker.shape[0]}"
        )
    if not np.all(np.isfinite(spk_tgt)):
        raise ValueError("target speaker vector contains non-finite values")
    return replace(f, speaker=_normalize_speaker(spk_tgt), aux=dict(f.aux))


def voice_convert(backend: CodecBackend, x_src: Waveform, x_spk_ref: Waveform) -> Waveform:
    """Resynthesize x_src carrying the speaker identity of x_spk_ref."""
    native = getattr(backend, "convert", None)
    if native is not None:
        return native(x_src, x_spk_ref)
    f_src = backend.disentangle(x_src)
    ref_speaker = backend.disentangle(x_spk_ref).speaker
    return backend.synthesize(convert_speaker(f_src, ref_speaker))


# ---------------------------------------------------------------------------
# FSPC1 container: magic, u32 T/D_p/D_c/D_s/D_r, f32le blocks in order
# prosody, content, speaker, residual, then length-prefixed UTF-8 backend id.
# Bookkeeping (aux) is deliberately not serialized.


def write_fspc(f: FactorizedSpeech, path: str | Path) -> None:
    f.validate()
    d_p, d_c, d_s, d_r = f.dims
    parts = [_FSPC_MAGIC, struct.pack("<5I", f.n_frames, d_p, d_c, d_s, d_r)]
    for block in (f.prosody, f.content, f.speaker, f.residual):
        parts.append(np.ascontiguousarray(block, dtype="<f4").tobytes())
    backend_id = f.backend_id.encode("utf-8")
    parts.append(struct.pack("<I", len(backend_id)) + backend_id)
    Path(path).write_bytes(b"".join(parts))


def read_fspc(path: str | Path, frame_shift_s: float = 0.010,
              sample_rate: int = 16000) -> FactorizedSpeech:
    data = Path(path).read_bytes()
    if len(data) < 5 + 20 or data[:5] != _FSPC_MAGIC:
        raise ValueError(f"{path}: not an FSPC1 file")
    t, d_p, d_c, d_s, d_r = struct.unpack_from("<5I", data, 5)
    pos = 5 + 20
    blocks = []
    for rows, cols in ((t, d_p), (t, d_c), (1, d_s), (t, d_r)):
        nbytes = 4 * rows * cols
        if pos + nbytes > len(data):
            raise ValueError(f"{path}: truncated block data")
        arr = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=pos)
        blocks.append(arr.astype(np.float64).reshape(rows, cols))
        pos += nbytes
    if pos + 4 > len(data):
        raise ValueError(f"{path}: missing backend id")
    (id_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    backend_id = data[pos : pos + id_len].decode("utf-8")
    return FactorizedSpeech(
        prosody=blocks[0],
        content=blocks[1],
        speaker=blocks[2][0],
        residual=blocks[3],
        frame_shift_s=frame_shift_s,
        sample_rate=sample_rate,
        backend_id=backend_id,
    )


# ---------------------------------------------------------------------------
# Remote backend: client for the codec inference service.

ENV_CODEC_URL = "FARAUG_CODEC_URL"

_B64_BLOCKS = ("prosody", "content", "speaker", "residual")


def _encode_block(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _decode_block(text: str, rows: int, cols: int, name: str) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"))
    if len(raw) != 4 * rows * cols:
        raise CodecServiceError(
            f"service returned {len(raw)} bytes for {name}, expected {4 * rows * cols}"
        )
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(rows, cols)


class RemoteCodecBackend:
    """HTTP client for a codec inference service.

    The base URL comes from the constructor argument or the
    FARAUG_CODEC_URL environment variable. Dims, rates, and frame metadata
    are discovered from GET /health and never assumed.
    """

    def __init__(self, base_url: str | None = None, timeout_s: float = 120.0) -> None:
        url = base_url or os.environ.get(ENV_CODEC_URL)
        if not url:
            raise CodecServiceError(
                f"no codec service URL: pass base_url or set {ENV_CODEC_URL}"
            )
        self._base = url.rstrip("/")
        self._timeout = timeout_s
        self._session = requests.Session()
        self._info: dict | None = None

    def _request(self, method: str, route: str, **kwargs) -> requests.Response:
        try:
            resp = self._session.request(
                method, self._base + route, timeout=self._timeout, **kwargs
            )
        except requests.RequestException as exc:
            raise CodecServiceError(f"codec service unreachable: {exc}") from exc
        if resp.status_code != 200:
            detail = resp.text[:200]
            raise CodecServiceError(
                f"codec service {route} returned HTTP {resp.status_code}: {detail}"
            )
        return resp

    @property
    def info(self) -> dict:
        if self._info is None:
            self._info = self._request("GET", "/health").json()
        return self._info

    @property
    def backend_id(self) -> str:
        return str(self.info["backend_id"])

    @property
    def sample_rate(self) -> int:
        return int(self.info["sample_rate"])

    @property
    def dims(self) -> tuple[int, int, int, int]:
        d = self.info["dims"]
        return (int(d["prosody"]), int(d["content"]), int(d["speaker"]), int(d["residual"]))

    @property
    def frame_shift_s(self) -> float:
        return float(self.info["frame_shift_s"])

    @staticmethod
    def _wav_bytes(w: Waveform) -> bytes:
        from .audio import encode_wav

        return encode_wav(w, encoding="float32")[0]

    def disentangle(self, w: Waveform) -> FactorizedSpeech:
        resp = self._request(
            "POST", "/v1/disentangle", data=self._wav_bytes(w),
            headers={"Content-Type": "audio/wav"},
        )
        body = resp.json()
        t = int(body["T"])
        dims = body["dims"]
        d_p, d_c, d_s, d_r = (int(dims[k]) for k in _B64_BLOCKS)
        return FactorizedSpeech(
            prosody=_decode_block(body["prosody"], t, d_p, "prosody"),
            content=_decode_block(body["content"], t, d_c, "content"),
            speaker=_decode_block(body["speaker"], 1, d_s, "speaker")[0],
            residual=_decode_block(body["residual"], t, d_r, "residual"),
            frame_shift_s=self.frame_shift_s,
            sample_rate=self.sample_rate,
            backend_id=self.backend_id,
        )

    def synthesize(self, f: FactorizedSpeech) -> Waveform:
        f.validate()
        d_p, d_c, d_s, d_r = f.dims
        body = {
            "T": f.n_frames,
            "dims": {"prosody": d_p, "content": d_c, "speaker": d_s, "residual": d_r},
            "prosody": _encode_block(f.prosody),
            "content": _encode_block(f.content),
            "speaker": _encode_block(f.speaker),
            "residual": _encode_block(f.residual),
        }
        resp = self._request("POST", "/v1/synthesize", json=body)
        return self._wav_from_bytes(resp.content)

    def convert(self, x_src: Waveform, x_spk_ref: Waveform) -> Waveform:
        resp = self._request(
            "POST", "/v1/convert",
            files={
                "source": ("source.wav", self._wav_bytes(x_src), "audio/wav"),
                "speaker_ref": ("speaker_ref.wav", self._wav_bytes(x_spk_ref), "audio/wav"),
            },
        )
        return self._wav_from_bytes(resp.content)

    @staticmethod
    def _wav_from_bytes(blob: bytes) -> Waveform:
        from .audio import decode_wav

        return decode_wav(blob, source="<codec service response>")
