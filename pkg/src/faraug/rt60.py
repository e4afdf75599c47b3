"""Blind reverberation-time estimation from free-decay segments.

The estimator finds stretches of monotone energy decay after strong local
maxima, fits each with the maximum-likelihood decay rate for Gaussian
noise under an exponential envelope, converts tau to RT60 (energy falls
60 dB, a factor ln(10^3) = 6.9078 of tau), and aggregates with the 20th
percentile so early reflections and overlapping speech bias the result
less than free decays do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio import Waveform

RT60_MIN = 0.05
RT60_MAX = 3.0
_LN_1000 = math.log(1000.0)

_FRAME_S = 0.010          # energy frames for decay tracking
_MIN_SEGMENT_S = 0.120    # monotone decrease must last at least this long
_HYSTERESIS_DB = 2.0      # tolerated wiggle while "decreasing"
_PEAK_ABOVE_FLOOR_DB = 15.0
_FLOOR_STOP_DB = 3.0      # stop the walk once energy reaches floor + this
_TRIM_DB = 1.5            # fit starts at the last frame within this of the peak
_MIN_DROP_DB = 10.0       # a qualifying segment must actually fall this much
_MAX_SEGMENT_SAMPLES = 48000
_GRID_POINTS = 48
_GOLDEN_ITERS = 40
_CONFIDENCE_BAND = 0.30


class DecayNotFoundError(ValueError):
    """No qualifying free-decay segment exists in the signal."""


@dataclass
class Rt60Estimate:
    rt60_s: float
    confidence: float
    n_segments: int


@dataclass
class ClosenessReport:
    rt60_a: float
    rt60_b: float
    rt60_c: float
    closer_to: str  # "b", "c", or "tie"


def _pow2_normalize(x: np.ndarray) -> np.ndarray:
    # scaling by a power of two is exact in binary floating point, which
    # makes the whole estimate literally gain-invariant
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        return x
    return x * 2.0 ** (-math.floor(math.log2(peak)))


def _frame_energies_db(x: np.ndarray, frame: int) -> np.ndarray:
    n = (x.size // frame) * frame
    if n == 0:
        return np.empty(0)
    e = np.mean(x[:n].reshape(-1, frame) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(e)


def _decay_segments(e_db: np.ndarray, min_frames: int) -> list[tuple[int, int]]:
    finite = e_db[np.isfinite(e_db)]
    floor_db = np.percentile(finite, 10) if finite.size else -np.inf
    segments = []
    i = 1
    while i < e_db.size - 1:
        is_peak = e_db[i] >= e_db[i - 1] and e_db[i] >= e_db[i + 1]
        if not (is_peak and e_db[i] >= floor_db + _PEAK_ABOVE_FLOOR_DB):
            i += 1
            continue
        lowest = e_db[i]
        j = i
        while j + 1 < e_db.size:
            nxt = e_db[j + 1]
            if nxt > lowest + _HYSTERESIS_DB:
                break
            j += 1
            lowest = min(lowest, nxt)
            if math.isfinite(floor_db) and nxt <= floor_db + _FLOOR_STOP_DB:
                break
        if j - i + 1 >= min_frames:
            segments.append((i, j + 1))
            i = j + 1
        else:
            i += 1
    return segments


def _profile_loglik(log_y2: np.ndarray, t: np.ndarray, tau: float) -> float:
    # y_i ~ N(0, sigma^2 exp(-2 t_i / tau)); sigma profiled out analytically.
    # Everything stays in log space so tiny tails cannot overflow.
    n = log_y2.size
    a = log_y2 + 2.0 * t / tau
    peak = float(np.max(a))
    log_sigma2 = peak + math.log(float(np.sum(np.exp(a - peak)))) - math.log(n)
    return -0.5 * n * log_sigma2 + float(np.sum(t)) / tau


def _ml_tau(y: np.ndarray, rate: int) -> float:
    t = np.arange(y.size, dtype=np.float64) / rate
    with np.errstate(divide="ignore"):
        log_y2 = np.log(y ** 2)
    lo, hi = RT60_MIN / _LN_1000, RT60_MAX / _LN_1000
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), _GRID_POINTS))
    scores = [_profile_loglik(log_y2, t, tau) for tau in grid]
    k = int(np.argmax(scores))
    a = math.log(grid[max(k - 1, 0)])
    b = math.log(grid[min(k + 1, _GRID_POINTS - 1)])
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc = _profile_loglik(log_y2, t, math.exp(c))
    fd = _profile_loglik(log_y2, t, math.exp(d))
    for _ in range(_GOLDEN_ITERS):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _profile_loglik(log_y2, t, math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _profile_loglik(log_y2, t, math.exp(d))
    return min(max(math.exp((a + b) / 2.0), lo), hi)


def estimate_rt60(w: Waveform) -> Rt60Estimate:
    """Blind RT60 estimate with a segment-agreement confidence.

    Requires at least 1 s of audio and at least one qualifying decay
    segment; raises ValueError / DecayNotFoundError otherwise. Estimates
    pinned at the search bounds report confidence 0.
    """
    if w.duration_s < 1.0:
        raise ValueError(
            f"need at least 1 s of audio for a blind RT60 estimate, got {w.duration_s:.3f} s"
        )
    x = _pow2_normalize(w.samples)
    frame = int(round(_FRAME_S * w.sample_rate))
    e_db = _frame_energies_db(x, frame)
    min_frames = int(round(_MIN_SEGMENT_S / _FRAME_S))
    segments = _decay_segments(e_db, min_frames)
    if not segments:
        raise DecayNotFoundError("no free-decay segments found; signal may be stationary")

    estimates = []
    for lo_f, hi_f in segments:
        # start the fit at the last frame still near the segment maximum,
        # so flat burst frames before the true decay onset don't drag tau up
        seg_db = e_db[lo_f:hi_f]
        top = float(np.max(seg_db[np.isfinite(seg_db)]))
        near_top = np.flatnonzero(seg_db >= top - _TRIM_DB)
        start = lo_f + int(near_top[-1]) if near_top.size else lo_f
        if hi_f - start < min_frames:
            start = lo_f
        # a stretch that never falls far is level modulation, not free decay
        tail = seg_db[start - lo_f :]
        tail_finite = tail[np.isfinite(tail)]
        if tail_finite.size == 0 or top - float(np.min(tail_finite)) < _MIN_DROP_DB:
            continue
        y = x[start * frame : hi_f * frame][:_MAX_SEGMENT_SAMPLES]
        estimates.append(_ml_tau(y, w.sample_rate) * _LN_1000)
    if not estimates:
        raise DecayNotFoundError("no free-decay segments found; signal may be stationary")
    estimates_arr = np.array(estimates)
    rt60 = float(np.percentile(estimates_arr, 20))

    at_bound = rt60 <= RT60_MIN * 1.0001 or rt60 >= RT60_MAX * 0.9999
    if at_bound:
        confidence = 0.0
    else:
        within = np.abs(estimates_arr - rt60) <= _CONFIDENCE_BAND * rt60
        confidence = float(np.mean(within))
    return Rt60Estimate(rt60_s=rt60, confidence=confidence, n_segments=len(estimates))


def compare_rt60(a: Waveform, b: Waveform, c: Waveform) -> ClosenessReport:
    """Which of b or c does a sit closer to in RT60 terms?"""
    est_a = estimate_rt60(a).rt60_s
    est_b = estimate_rt60(b).rt60_s
    est_c = estimate_rt60(c).rt60_s
    gap_b = abs(est_a - est_b)
    gap_c = abs(est_a - est_c)
    if gap_b < gap_c:
        closer = "b"
    elif gap_c < gap_b:
        closer = "c"
    else:
        closer = "tie"
    return ClosenessReport(rt60_a=est_a, rt60_b=est_b, rt60_c=est_c, closer_to=closer)


def emit_rt60_plot(estimates, out_path) -> None:
    """SVG scatter of per-utterance RT60 estimates grouped by label.

    ``estimates`` is a flat list of (label, Rt60Estimate) pairs; one
    scatter column per distinct label, in first-seen order.
    """
    from .plots import scatter_chart

    if not estimates:
        raise ValueError("no RT60 estimates to plot")
    groups: dict[str, list[float]] = {}
    for label, est in estimates:
        groups.setdefault(str(label), []).append(est.rt60_s)
    scatter_chart(list(groups.items()), out_path, title="blind RT60 by group", y_label="RT60 (s)")
