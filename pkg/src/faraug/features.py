"""Frame-level spectral features: STFT, log-mel filterbanks, feature dumps.

Framing follows the 25 ms window / 10 ms hop convention with no centering,
so T = 1 + floor((n_samples - win) / hop). The mel filterbank is a uniform
hat basis on the mel axis whose weights sum to 1 at every in-band FFT bin.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .audio import Waveform

MEL_BANDS = 80
MEL_FMIN = 20.0
MEL_FMAX = 7800.0
LOG_FLOOR = 1e-10

FRAME_LEN_S = 0.025
FRAME_SHIFT_S = 0.010

_FEATURE_MAGIC = b"FEA1"
_HEADER = struct.Struct("<4sIIIff")


@dataclass
class Spectrogram:
    """Complex STFT frames, shape (T, fft_size // 2 + 1)."""

    frames: np.ndarray
    frame_len_s: float
    frame_shift_s: float
    sample_rate: int


@dataclass
class MelSpectrogram:
    """Log mel energies, shape (T, MEL_BANDS)."""

    frames: np.ndarray
    frame_len_s: float
    frame_shift_s: float
    sample_rate: int


def frame_geometry(sample_rate: int,
                   frame_len_s: float = FRAME_LEN_S,
                   frame_shift_s: float = FRAME_SHIFT_S) -> tuple[int, int, int]:
    """Return (win, hop, fft_size) for a sample rate."""
    win = int(round(frame_len_s * sample_rate))
    hop = int(round(frame_shift_s * sample_rate))
    fft_size = 1
    while fft_size < win:
        fft_size *= 2
    return win, hop, fft_size


def frame_count(n_samples: int, win: int, hop: int) -> int:
    if n_samples < win:
        return 0
    return 1 + (n_samples - win) // hop


def _hann_periodic(win: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)


def stft(w: Waveform,
         frame_len_s: float = FRAME_LEN_S,
         frame_shift_s: float = FRAME_SHIFT_S) -> Spectrogram:
    """Hann-windowed short-time Fourier transform, no centering."""
    win, hop, fft_size = frame_geometry(w.sample_rate, frame_len_s, frame_shift_s)
    t = frame_count(len(w), win, hop)
    if t < 1:
        raise ValueError(
            f"waveform of {len(w)} samples is shorter than one {win}-sample frame"
        )
    frames = np.lib.stride_tricks.sliding_window_view(w.samples, win)[::hop][:t]
    spec = np.fft.rfft(frames * _hann_periodic(win), n=fft_size, axis=1)
    return Spectrogram(spec, frame_len_s, frame_shift_s, w.sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


_FILTERBANK_CACHE: dict[tuple, np.ndarray] = {}


def mel_filterbank(sample_rate: int, fft_size: int,
                   n_bands: int = MEL_BANDS,
                   fmin: float = MEL_FMIN,
                   fmax: float = MEL_FMAX) -> np.ndarray:
    """Hat-function mel filterbank, shape (n_bands, fft_size // 2 + 1).

    Nodes are uniform on the mel axis from fmin to fmax with half-hats at
    the edges, so the filter weights at any bin inside [fmin, fmax] sum to
    exactly 1 (first-order FEM partition of unity).
    """
    key = (sample_rate, fft_size, n_bands, fmin, fmax)
    cached = _FILTERBANK_CACHE.get(key)
    if cached is not None:
        return cached
    bin_hz = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
    bin_mel = hz_to_mel(bin_hz)
    nodes = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_bands)
    spacing = nodes[1] - nodes[0]
    in_band = (bin_hz >= fmin) & (bin_hz <= fmax)
    weights = 1.0 - np.abs(bin_mel[None, :] - nodes[:, None]) / spacing
    fb = np.where(weights > 0.0, weights, 0.0) * in_band[None, :]
    _FILTERBANK_CACHE[key] = fb
    return fb


def log_mel(w: Waveform, mean_norm: bool = False) -> MelSpectrogram:
    """80-band natural-log mel energies with floor LOG_FLOOR.

    mean_norm subtracts the per-channel mean over time (per-utterance CMN);
    it is off by default.
    """
    spec = stft(w)
    power = np.abs(spec.frames) ** 2
    fft_size = (spec.frames.shape[1] - 1) * 2
    fb = mel_filterbank(w.sample_rate, fft_size)
    energies = power @ fb.T
    frames = np.log(np.maximum(energies, LOG_FLOOR))
    if mean_norm:
        frames = frames - frames.mean(axis=0)
    return MelSpectrogram(frames, spec.frame_len_s, spec.frame_shift_s, w.sample_rate)


# ---------------------------------------------------------------------------
# Feature dump: flat binary f32 records plus a text sidecar index.
# Record layout: magic "FEA1", u32 T, u32 dim, u32 sample_rate,
# f32 frame_len_s, f32 frame_shift_s, then T*dim little-endian f32 row-major.


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".idx")


def write_feature_dump(path: str | Path,
                       items: Iterable[tuple[str, MelSpectrogram]]) -> None:
    """Write feature records for (utt_id, features) pairs plus the sidecar."""
    index_lines = []
    with open(path, "wb") as fh:
        for utt_id, mel in items:
            if "\t" in utt_id or "\n" in utt_id:
                raise ValueError(f"utt_id {utt_id!r} contains reserved characters")
            index_lines.append(f"{utt_id}\t{fh.tell()}\n")
            frames = np.ascontiguousarray(mel.frames, dtype="<f4")
            t, dim = frames.shape
            fh.write(_HEADER.pack(_FEATURE_MAGIC, t, dim, mel.sample_rate,
                                  mel.frame_len_s, mel.frame_shift_s))
            fh.write(frames.tobytes())
    sidecar_path(path).write_text("".join(index_lines), encoding="utf-8")


def read_feature_record(path: str | Path, offset: int) -> MelSpectrogram:
    with open(path, "rb") as fh:
        fh.seek(offset)
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated record header at offset {offset}")
        magic, t, dim, rate, flen, fshift = _HEADER.unpack(head)
        if magic != _FEATURE_MAGIC:
            raise ValueError(f"{path}: bad record magic at offset {offset}")
        raw = fh.read(4 * t * dim)
        if len(raw) < 4 * t * dim:
            raise ValueError(f"{path}: truncated record data at offset {offset}")
    frames = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(t, dim)
    return MelSpectrogram(frames, float(flen), float(fshift), int(rate))


def iter_feature_dump(path: str | Path) -> Iterator[tuple[str, MelSpectrogram]]:
    for line in sidecar_path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        utt_id, offset = line.rsplit("\t", 1)
        yield utt_id, read_feature_record(path, int(offset))


def load_feature_dump(path: str | Path) -> dict[str, MelSpectrogram]:
    return dict(iter_feature_dump(path))
