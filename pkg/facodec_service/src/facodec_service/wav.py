"""Mono WAV byte codec for request and response bodies.

Reads PCM16 and IEEE-float32, downmixing multichannel to mono by mean.
Writes float32 with the canonical fact chunk so float payloads round-trip
bit-exactly. No filesystem involvement; everything is bytes in, bytes out.
"""
import struct

import numpy as np

_PCM16_SCALE = 32768.0


class WavDecodeError(ValueError):
    """Body is not a decodable WAV stream."""


def decode(data: bytes) -> tuple[np.ndarray, int]:
    """Decode WAV bytes to (float64 mono samples, sample rate)."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavDecodeError("not a RIFF/WAVE stream")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise WavDecodeError("fmt chunk truncated")
            tag, n_ch, rate, _, _, bits = struct.unpack_from("<HHIIHH", body, 0)
            fmt = (tag, n_ch, rate, bits)
        elif chunk_id == b"data":
            if len(body) < size:
                raise WavDecodeError("data chunk truncated")
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise WavDecodeError("missing fmt or data chunk")
    tag, n_ch, rate, bits = fmt
    if n_ch < 1 or rate <= 0:
        raise WavDecodeError("invalid channel count or sample rate")

    if (tag, bits) == (1, 16):
        width = 2 * n_ch
        if len(payload) % width:
            raise WavDecodeError("data chunk holds a partial frame")
        raw = np.frombuffer(payload, dtype="<i2").astype(np.float64)
        mono = raw.reshape(-1, n_ch).mean(axis=1) / _PCM16_SCALE
    elif (tag, bits) == (3, 32):
        width = 4 * n_ch
        if len(payload) % width:
            raise WavDecodeError("data chunk holds a partial frame")
        raw = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        mono = raw.reshape(-1, n_ch).mean(axis=1)
    else:
        raise WavDecodeError(
            f"unsupported encoding (format tag {tag}, {bits}-bit); "
            "only PCM16 and IEEE float32 are readable"
        )
    if mono.size == 0:
        raise WavDecodeError("data chunk holds no audio frames")
    return mono, int(rate)


def encode_float32(samples: np.ndarray, rate: int) -> bytes:
    """Encode mono float64 samples as an IEEE-float32 WAV stream."""
    y = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    body = y.astype("<f4").tobytes()
    fmt_body = struct.pack("<HHIIHH", 3, 1, rate, rate * 4, 4, 32)
    fact = struct.pack("<I", y.size)
    chunks = [(b"fmt ", fmt_body), (b"fact", fact), (b"data", body)]

    blob = bytearray()
    for cid, cbody in chunks:
        blob += cid + struct.pack("<I", len(cbody)) + cbody
        if len(cbody) & 1:
            blob += b"\x00"
    return b"RIFF" + struct.pack("<I", 4 + len(blob)) + b"WAVE" + bytes(blob)


def resample(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    if src_rate == dst_rate:
        return samples
    from scipy.signal import resample_poly

    from math import gcd

    g = gcd(src_rate, dst_rate)
    return resample_poly(samples, dst_rate // g, src_rate // g)
