"""Mono waveform container, WAV file I/O, resampling, and power helpers.

Everything downstream operates on float64 mono samples in [-1, 1] at a
nominal working rate of 16 kHz. Readers are lossless (native rate is
preserved); pipeline loaders normalize on ingest via :func:`load_utterance`.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

WORKING_RATE = 16000

_PCM16_SCALE = 32768.0
_SINC_LOBES = 32        # zero crossings per side of the interpolation kernel
_KAISER_BETA = 8.6      # roughly 80 dB stopband
_CUTOFF_SCALE = 0.985   # keeps the transition band below the new Nyquist


class WavError(Exception):
    """Base class for WAV container failures."""


class MalformedWavError(WavError):
    """RIFF/WAVE structure is damaged, truncated, or inconsistent."""


class UnsupportedEncodingError(WavError):
    """Container is intact but samples are not PCM16 or IEEE float32."""


@dataclass(eq=False)
class Waveform:
    """Mono audio buffer.

    samples: 1-D float64 array, nominally within [-1, 1].
    sample_rate: positive integer in Hz.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if self.samples.size < 1:
            raise ValueError("waveform must hold at least one sample")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self) -> int:
        return int(self.samples.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


def read_wav(path: str | Path) -> Waveform:
    """Read a RIFF/WAVE file (PCM16 or IEEE float32, any channel count).

    Multi-channel audio is downmixed by the channel mean. PCM16 samples are
    scaled by 1/32768. Raises FileNotFoundError for a missing file,
    MalformedWavError for a damaged container, UnsupportedEncodingError for
    encodings other than PCM16/float32.
    """
    return decode_wav(Path(path).read_bytes(), source=str(path))


def decode_wav(data: bytes, source: str = "<bytes>") -> Waveform:
    """Decode WAV container bytes; see read_wav for the accepted encodings."""
    path = source
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: not a RIFF/WAVE file")

    fmt: tuple[int, int, int, int] | None = None
    payload: bytes | None = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedWavError(f"{path}: fmt chunk truncated")
            tag, n_ch, rate, _, _, bits = struct.unpack_from("<HHIIHH", body, 0)
            fmt = (tag, n_ch, rate, bits)
        elif chunk_id == b"data":
            if len(body) < size:
                raise MalformedWavError(f"{path}: data chunk truncated")
            payload = body
        pos += 8 + size + (size & 1)

    if fmt is None or payload is None:
        raise MalformedWavError(f"{path}: missing fmt or data chunk")
    tag, n_ch, rate, bits = fmt
    if n_ch < 1 or rate <= 0:
        raise MalformedWavError(f"{path}: invalid channel count or sample rate")

    if (tag, bits) == (1, 16):
        width = 2 * n_ch
        if len(payload) % width:
            raise MalformedWavError(f"{path}: data chunk holds a partial frame")
        raw = np.frombuffer(payload, dtype="<i2").astype(np.float64)
        mono = raw.reshape(-1, n_ch).mean(axis=1) / _PCM16_SCALE
    elif (tag, bits) == (3, 32):
        width = 4 * n_ch
        if len(payload) % width:
            raise MalformedWavError(f"{path}: data chunk holds a partial frame")
        raw = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        mono = raw.reshape(-1, n_ch).mean(axis=1)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported encoding (format tag {tag}, {bits}-bit); "
            "only PCM16 and IEEE float32 are readable"
        )
    if mono.size == 0:
        raise MalformedWavError(f"{path}: data chunk holds no audio frames")
    return Waveform(mono, rate)


def encode_wav(w: Waveform, encoding: str = "pcm16") -> tuple[bytes, int]:
    """Encode to WAV container bytes; returns (bytes, clipped sample count)."""
    if encoding not in ("pcm16", "float32"):
        raise ValueError(f"unknown encoding {encoding!r}")
    x = w.samples
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    y = np.clip(x, -1.0, 1.0)

    if encoding == "pcm16":
        q = np.clip(np.round(y * _PCM16_SCALE), -32768, 32767).astype("<i2")
        body = q.tobytes()
        fmt_body = struct.pack("<HHIIHH", 1, 1, w.sample_rate, w.sample_rate * 2, 2, 16)
        chunks = [(b"fmt ", fmt_body), (b"data", body)]
    else:
        body = y.astype("<f4").tobytes()
        fmt_body = struct.pack("<HHIIHH", 3, 1, w.sample_rate, w.sample_rate * 4, 4, 32)
        fact = struct.pack("<I", y.size)
        chunks = [(b"fmt ", fmt_body), (b"fact", fact), (b"data", body)]

    blob = bytearray()
    for cid, cbody in chunks:
        blob += cid + struct.pack("<I", len(cbody)) + cbody
        if len(cbody) & 1:
            blob += b"\x00"
    header = b"RIFF" + struct.pack("<I", 4 + len(blob)) + b"WAVE"
    return header + bytes(blob), clipped


def write_wav(w: Waveform, path: str | Path, encoding: str = "pcm16") -> int:
    """Write a mono WAV file and return the number of clipped samples.

    encoding "pcm16" quantizes with max abs round-trip error 2**-15;
    "float32" is bit-exact for float32-representable samples. Samples
    outside [-1, 1] are clipped first and counted in the return value.
    """
    blob, clipped = encode_wav(w, encoding)
    Path(path).write_bytes(blob)
    return clipped


def rms_power(w: Waveform) -> float:
    """Mean squared sample value."""
    return float(np.mean(np.square(w.samples)))


def _output_length(n: int, src_rate: int, dst_rate: int) -> int:
    # round-half-up in exact integer arithmetic
    return max(1, (2 * n * dst_rate + src_rate) // (2 * src_rate))


def _kernel(u: np.ndarray, cutoff: float, half: float) -> np.ndarray:
    z = u / half
    inside = np.abs(z) < 1.0
    win = np.zeros_like(u)
    win[inside] = np.i0(_KAISER_BETA * np.sqrt(1.0 - z[inside] ** 2))
    win /= np.i0(_KAISER_BETA)
    return cutoff * np.sinc(cutoff * u) * win


def _sinc_interpolate(x: np.ndarray, ratio: float, n_out: int) -> np.ndarray:
    """Windowed-sinc interpolation of x onto n_out points spaced 1/ratio apart.

    The kernel has 32 sinc lobes per side and stretches with the rate ratio
    when downsampling so the cutoff tracks the new Nyquist. Per-output
    normalization by the kernel sum keeps DC gain at exactly 1.
    """
    n = x.size
    cutoff = _CUTOFF_SCALE * min(1.0, ratio)
    half = _SINC_LOBES / cutoff
    n_taps = int(2 * half) + 3
    offsets = np.arange(n_taps)

    out = np.empty(n_out, dtype=np.float64)
    step = 1.0 / ratio
    chunk = max(1, int(4e6) // n_taps)
    for start in range(0, n_out, chunk):
        stop = min(start + chunk, n_out)
        t = np.arange(start, stop, dtype=np.float64) * step
        k0 = np.ceil(t - half).astype(np.int64)
        idx = k0[:, None] + offsets[None, :]
        u = t[:, None] - idx
        w = _kernel(u, cutoff, half)
        valid = (idx >= 0) & (idx < n)
        xg = np.where(valid, x[np.clip(idx, 0, n - 1)], 0.0)
        out[start:stop] = (xg * w).sum(axis=1) / w.sum(axis=1)
    return out


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Band-limited resampling; output length is round(len * target / source).

    Identity rates return an equal copy. Stopband sits below the new Nyquist
    (cutoff 0.985 * min(1, ratio)).
    """
    if int(target_rate) <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    n_out = _output_length(len(w), w.sample_rate, target_rate)
    y = _sinc_interpolate(w.samples, target_rate / w.sample_rate, n_out)
    return Waveform(y, target_rate)


def load_utterance(path: str | Path, target_rate: int = WORKING_RATE) -> Waveform:
    """Read a WAV file and resample to the working rate."""
    return resample(read_wav(path), target_rate)
