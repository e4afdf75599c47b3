"""Deterministic synthetic audio: tones, noise, decays, impulse responses.

Everything here exists so experiments and tests can run without any real
corpus. All generators are pure functions of their seeds.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import WORKING_RATE, Waveform, write_wav
from .classical import apply_rir, derive_seed
from .manifests import UtteranceRecord

_LN_1000 = math.log(1000.0)


def white_noise(duration_s: float, *, seed: int, rate: int = WORKING_RATE,
                amplitude: float = 0.1) -> Waveform:
    n = max(1, int(round(duration_s * rate)))
    rng = np.random.default_rng(seed)
    return Waveform(amplitude * rng.standard_normal(n), rate)


def sine(freq_hz: float, duration_s: float, *, rate: int = WORKING_RATE,
         amplitude: float = 0.5, phase: float = 0.0) -> Waveform:
    n = max(1, int(round(duration_s * rate)))
    t = np.arange(n) / rate
    return Waveform(amplitude * np.sin(2.0 * math.pi * freq_hz * t + phase), rate)


def harmonic_tone(f0_hz: float, duration_s: float, *, rate: int = WORKING_RATE,
                  partial_amps=(1.0, 0.5, 0.25, 0.125), amplitude: float = 0.5) -> Waveform:
    """Sum of harmonics of f0, peak-normalized to `amplitude`."""
    n = max(1, int(round(duration_s * rate)))
    t = np.arange(n) / rate
    y = np.zeros(n)
    for k, a in enumerate(partial_amps, start=1):
        y += a * np.sin(2.0 * math.pi * k * f0_hz * t)
    peak = np.max(np.abs(y))
    if peak > 0:
        y *= amplitude / peak
    return Waveform(y, rate)


def decay_burst(rt60_s: float, *, seed: int, rate: int = WORKING_RATE,
                attack_s: float = 0.25, floor_db: float = -75.0) -> Waveform:
    """Noise burst followed by an exponential free decay at the given RT60.

    The energy envelope after the burst is exp(-2 t / tau) with
    tau = rt60 / ln(1000), i.e. a 60 dB fall takes exactly rt60 seconds.
    A weak independent noise floor keeps log energies finite.
    """
    if rt60_s <= 0:
        raise ValueError("rt60_s must be positive")
    rng = np.random.default_rng(seed)
    tau = rt60_s / _LN_1000
    n_attack = int(round(attack_s * rate))
    # long enough to fall ~80 dB, so the decay always reaches the floor
    decay_s = min(max(rt60_s * 80.0 / 60.0 * 1.1, 0.8), 3.5)
    n_decay = int(round(decay_s * rate))
    n_pad = int(round(0.2 * rate))
    env = np.concatenate([
        np.ones(n_attack),
        np.exp(-np.arange(n_decay) / (tau * rate)),
        np.zeros(n_pad),
    ])
    y = 0.5 * rng.standard_normal(env.size) * env
    y += 0.5 * 10.0 ** (floor_db / 20.0) * rng.standard_normal(env.size)
    return Waveform(y, rate)


def burst_train(*, seed: int, rate: int = WORKING_RATE, n_bursts: int = 3,
                burst_s: float = 0.18, gap_s: float = 0.45, lead_s: float = 0.05,
                amplitude: float = 0.5) -> Waveform:
    """Noise bursts separated by exact-zero gaps (a dry excitation signal)."""
    rng = np.random.default_rng(seed)
    n_burst = int(round(burst_s * rate))
    n_gap = int(round(gap_s * rate))
    pieces = [np.zeros(int(round(lead_s * rate)))]
    for _ in range(n_bursts):
        pieces.append(amplitude * rng.standard_normal(n_burst))
        pieces.append(np.zeros(n_gap))
    return Waveform(np.concatenate(pieces), rate)


def synthetic_rir(rt60_s: float, *, seed: int, rate: int = WORKING_RATE,
                  tail_level: float = 0.35) -> Waveform:
    """Direct-path impulse plus an exponentially decaying noise tail."""
    if rt60_s <= 0:
        raise ValueError("rt60_s must be positive")
    rng = np.random.default_rng(seed)
    tau = rt60_s / _LN_1000
    n = max(int(round(rt60_s * 1.2 * rate)), int(0.05 * rate))
    h = tail_level * rng.standard_normal(n) * np.exp(-np.arange(n) / (tau * rate))
    h[0] = 1.0
    return Waveform(h, rate)


def reverberant_bursts(rt60_s: float, *, seed: int, rate: int = WORKING_RATE,
                       n_bursts: int = 3, floor_db: float = -70.0) -> Waveform:
    """Burst train convolved with a synthetic room response of the given RT60.

    The gaps are sized so each decay reaches the noise floor before the
    next burst, giving the blind estimator clean free-decay segments.
    """
    gap_s = max(0.45, rt60_s * 1.3)
    dry = burst_train(seed=derive_seed(seed, "rev-bursts", "dry"), rate=rate,
                      n_bursts=n_bursts, gap_s=gap_s)
    rir = synthetic_rir(rt60_s, seed=derive_seed(seed, "rev-bursts", "rir"), rate=rate)
    wet = apply_rir(dry, rir)
    rng = np.random.default_rng(derive_seed(seed, "rev-bursts", "floor"))
    peak = np.max(np.abs(wet.samples))
    floor = peak * 10.0 ** (floor_db / 20.0) * rng.standard_normal(len(wet))
    return Waveform(wet.samples + floor, rate)


def _resonator_coeffs(freq_hz: float, bw_hz: float, rate: int):
    r = math.exp(-math.pi * bw_hz / rate)
    theta = 2.0 * math.pi * freq_hz / rate
    b = [1.0 - r]
    a = [1.0, -2.0 * r * math.cos(theta), r * r]
    return b, a


def speech_like(duration_s: float = 1.2, *, speaker_seed: int, seed: int,
                rate: int = WORKING_RATE) -> Waveform:
    """Crude voiced babble: pulse train through speaker-specific resonators.

    The speaker seed fixes pitch and resonance placement, the utterance
    seed fixes syllable timing, so two utterances of one "speaker" share
    a spectral envelope while differing in content. Pauses are exact
    zeros (a near-field, anechoic-style signal).
    """
    spk = np.random.default_rng(speaker_seed)
    f0 = 90.0 + 130.0 * spk.random()
    freqs = spk.uniform((300.0, 900.0, 1900.0), (700.0, 1700.0, 3200.0))
    bws = spk.uniform(60.0, 130.0, size=3)

    rng = np.random.default_rng(seed)
    n_total = max(1, int(round(duration_s * rate)))
    pieces = []
    n_done = 0
    while n_done < n_total:
        n_voiced = int(rng.uniform(0.12, 0.22) * rate)
        period = int(round(rate / (f0 * rng.uniform(0.95, 1.05))))
        exc = np.zeros(n_voiced)
        exc[::period] = 1.0
        exc += 0.05 * rng.standard_normal(n_voiced)
        y = exc
        for f, bw in zip(freqs, bws):
            b, a = _resonator_coeffs(f, bw, rate)
            y = lfilter(b, a, y)
        ramp = min(int(0.008 * rate), n_voiced // 2)
        if ramp > 0:
            fade = 0.5 - 0.5 * np.cos(np.linspace(0.0, math.pi, ramp))
            y[:ramp] *= fade
            y[-ramp:] *= fade[::-1]
        pieces.append(y)
        pieces.append(np.zeros(int(rng.uniform(0.04, 0.09) * rate)))
        n_done += pieces[-2].size + pieces[-1].size
    y = np.concatenate(pieces)[:n_total]
    if y.size < n_total:
        y = np.pad(y, (0, n_total - y.size))
    peak = np.max(np.abs(y))
    if peak > 0:
        y *= 0.5 / peak
    return Waveform(y, rate)


def build_corpus(out_dir: str | Path, *, n_speakers: int, utts_per_speaker: int,
                 domain: str, seed: int, rate: int = WORKING_RATE,
                 duration_s: float = 1.2, rir_rt60_s: float | None = None,
                 speaker_prefix: str | None = None) -> list[UtteranceRecord]:
    """Write a small synthetic corpus and return its manifest records.

    With rir_rt60_s set, every utterance is convolved with a per-speaker
    room response (the far-field construction).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = speaker_prefix if speaker_prefix is not None else domain
    records = []
    for s in range(n_speakers):
        speaker_id = f"{prefix}{s:04d}"
        speaker_seed = derive_seed(seed, "speaker", speaker_id)
        rir = None
        if rir_rt60_s is not None:
            rir = synthetic_rir(rir_rt60_s, seed=derive_seed(seed, "rir", speaker_id),
                                rate=rate)
        for u in range(utts_per_speaker):
            utt_id = f"{speaker_id}_u{u:02d}"
            w = speech_like(duration_s, speaker_seed=speaker_seed,
                            seed=derive_seed(seed, "utt", utt_id), rate=rate)
            if rir is not None:
                w = apply_rir(w, rir)
            path = out_dir / f"{utt_id}.wav"
            write_wav(w, path, encoding="float32")
            records.append(UtteranceRecord(utt_id=utt_id, speaker_id=speaker_id,
                                           path=str(path), domain=domain))
    return records
