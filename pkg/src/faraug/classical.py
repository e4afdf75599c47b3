"""Classical augmentations: additive noise, RIR, speed, masking, shuffling.

Waveform-domain ops take and return Waveform; feature-domain ops work on
MelSpectrogram. Randomized ops take a numpy Generator; batch drivers derive
one seed per (master_seed, utt_id, op) so results are independent of worker
scheduling.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import fftconvolve

from .audio import Waveform, _output_length, _sinc_interpolate
from .features import MelSpectrogram

SPEED_FACTORS = (0.9, 1.0, 1.1)

_LN10_OVER_10 = math.log(10.0) / 10.0


def derive_seed(master_seed: int, *parts: str) -> int:
    """Stable 64-bit per-item seed from a master seed and string parts."""
    text = "\x1f".join([str(int(master_seed)), *parts])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class AugConfig:
    """Knobs for the classical augmentation family.

    Defaults: SNR drawn from [0, 20] dB, masks up to 10 frames / 8 bands,
    band gains within +-6 dB, 0.5 s shuffle blocks.
    """

    seed: int = 0
    snr_db_range: tuple[float, float] = (0.0, 20.0)
    speed_factors: tuple[float, ...] = SPEED_FACTORS
    spec_time_mask_max: int = 10
    spec_freq_mask_max: int = 8
    filter_db_range: tuple[float, float] = (-6.0, 6.0)
    shuffle_block_s: float = 0.5

    def __post_init__(self) -> None:
        lo, hi = self.snr_db_range
        if not lo <= hi:
            raise ValueError(f"snr_db_range is empty: {self.snr_db_range}")
        flo, fhi = self.filter_db_range
        if not flo <= fhi:
            raise ValueError(f"filter_db_range is empty: {self.filter_db_range}")
        if self.spec_time_mask_max < 0 or self.spec_freq_mask_max < 0:
            raise ValueError("mask widths must be non-negative")
        if self.shuffle_block_s <= 0:
            raise ValueError("shuffle_block_s must be positive")
        if any(f <= 0 for f in self.speed_factors):
            raise ValueError("speed factors must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in u64")


def add_noise_snr(speech: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """Mix noise into speech at an exact SNR.

    The noise is looped or trimmed to the speech length; the gain
    g = sqrt(P_speech / (P_noise * 10^(snr/10))) uses the power of the
    segment actually mixed, so the achieved SNR equals the request.
    snr_db = +inf returns the clean speech.
    """
    if speech.sample_rate != noise.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: speech {speech.sample_rate}, noise {noise.sample_rate}"
        )
    if math.isinf(snr_db) and snr_db > 0:
        return Waveform(speech.samples.copy(), speech.sample_rate)

    n = len(speech)
    seg = noise.samples
    if seg.size < n:
        reps = -(-n // seg.size)
        seg = np.tile(seg, reps)
    seg = seg[:n]

    p_speech = float(np.mean(np.square(speech.samples)))
    p_noise = float(np.mean(np.square(seg)))
    if p_speech == 0.0:
        raise ValueError("speech has zero power")
    if p_noise == 0.0:
        raise ValueError("noise segment has zero power")
    gain = math.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))
    return Waveform(speech.samples + gain * seg, speech.sample_rate)


def apply_rir(speech: Waveform, rir: Waveform) -> Waveform:
    """Convolve with a room impulse response.

    Full convolution truncated to the speech length, then peak-normalized
    back to the original speech peak.
    """
    if speech.sample_rate != rir.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: speech {speech.sample_rate}, rir {rir.sample_rate}"
        )
    wet = fftconvolve(speech.samples, rir.samples)[: len(speech)]
    peak_in = float(np.max(np.abs(speech.samples)))
    peak_out = float(np.max(np.abs(wet)))
    if peak_out == 0.0:
        raise ValueError("convolution produced silence; impulse response is degenerate")
    return Waveform(wet * (peak_in / peak_out), speech.sample_rate)


def speed_perturb(speech: Waveform, factor: float) -> Waveform:
    """Resampling-based speed change (tempo and pitch move together).

    Output length is round(len / factor); the sample rate is unchanged.
    """
    if factor <= 0:
        raise ValueError(f"speed factor must be positive, got {factor}")
    if factor == 1.0:
        return Waveform(speech.samples.copy(), speech.sample_rate)
    num, den = float(factor).as_integer_ratio()
    n_out = _output_length(len(speech), num, den)  # round(n / factor) exactly
    y = _sinc_interpolate(speech.samples, 1.0 / factor, n_out)
    return Waveform(y, speech.sample_rate)


def spec_augment(mel: MelSpectrogram, cfg: AugConfig,
                 rng: np.random.Generator) -> MelSpectrogram:
    """One time mask and one frequency mask, filled with the utterance mean.

    Mask widths are drawn uniformly from {0..max}; time warping is
    deliberately omitted. Draw order: time width, time start, freq width,
    freq start.
    """
    frames = mel.frames.copy()
    t, n_bands = frames.shape
    fill = float(frames.mean())

    t_width = int(rng.integers(0, min(cfg.spec_time_mask_max, t) + 1))
    t_start = int(rng.integers(0, t - t_width + 1))
    f_width = int(rng.integers(0, min(cfg.spec_freq_mask_max, n_bands) + 1))
    f_start = int(rng.integers(0, n_bands - f_width + 1))

    frames[t_start : t_start + t_width, :] = fill
    frames[:, f_start : f_start + f_width] = fill
    return replace(mel, frames=frames)


def filter_augment(mel: MelSpectrogram, cfg: AugConfig,
                   rng: np.random.Generator) -> MelSpectrogram:
    """Random piecewise band gains, linearly interpolated across channels.

    The 80 channels are split into k in {3..6} contiguous bands; each band
    draws a dB offset from filter_db_range. Offsets are anchored at band
    centers, interpolated per channel, and added to the natural-log
    energies as db * ln(10) / 10.
    """
    frames = mel.frames
    n_bands = frames.shape[1]
    k = int(rng.integers(3, 7))
    cuts = np.sort(rng.choice(np.arange(1, n_bands), size=k - 1, replace=False))
    edges = np.concatenate(([0], cuts, [n_bands]))
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    offsets_db = rng.uniform(cfg.filter_db_range[0], cfg.filter_db_range[1], size=k)
    curve_db = np.interp(np.arange(n_bands, dtype=np.float64), centers, offsets_db)
    return replace(mel, frames=frames + curve_db * _LN10_OVER_10)


def shuffle_augment(speech: Waveform, cfg: AugConfig,
                    rng: np.random.Generator) -> Waveform:
    """Permute fixed-length blocks of the waveform uniformly at random.

    Block length is round(shuffle_block_s * rate) samples; the final block
    may be shorter. A block length >= the signal length is the identity.
    """
    block = int(round(cfg.shuffle_block_s * speech.sample_rate))
    n = len(speech)
    if block >= n:
        return Waveform(speech.samples.copy(), speech.sample_rate)
    starts = np.arange(0, n, block)
    perm = rng.permutation(starts.size)
    pieces = [speech.samples[starts[i] : starts[i] + block] for i in perm]
    return Waveform(np.concatenate(pieces), speech.sample_rate)
