"""Blind decay-rate estimation on synthetic reverb fixtures."""
import numpy as np
import pytest

from faraug.audio import Waveform
from faraug.classical import apply_rir
from faraug.rt60 import (
    RT60_MAX,
    RT60_MIN,
    ClosenessReport,
    DecayNotFoundError,
    Rt60Estimate,
    compare_rt60,
    emit_rt60_plot,
    estimate_rt60,
)
from faraug.synth import (
    burst_train,
    decay_burst,
    reverberant_bursts,
    synthetic_rir,
    white_noise,
)


class TestEstimate:
    def test_recovers_known_decay(self):
        est = estimate_rt60(decay_burst(0.5, seed=1))
        assert est.rt60_s == pytest.approx(0.5, rel=0.10)
        assert est.n_segments >= 1
        assert 0.0 <= est.confidence <= 1.0

    def test_confident_on_clean_fixture(self):
        est = estimate_rt60(decay_burst(0.4, seed=2))
        assert est.confidence == 1.0

    def test_monotone_in_target(self):
        values = [estimate_rt60(reverberant_bursts(t, seed=5)).rt60_s
                  for t in (0.2, 0.5, 1.0)]
        assert values[0] < values[1] < values[2]

    def test_gain_invariance(self):
        w = reverberant_bursts(0.4, seed=6)
        base = estimate_rt60(w).rt60_s
        # power-of-two gain: framing energies scale bit-exactly
        exact = estimate_rt60(Waveform(w.samples * 0.25, w.sample_rate)).rt60_s
        assert exact == base
        other = estimate_rt60(Waveform(w.samples / 3.0, w.sample_rate)).rt60_s
        assert other == pytest.approx(base, rel=1e-6)

    def test_stationary_noise_has_no_decay(self):
        with pytest.raises(DecayNotFoundError):
            estimate_rt60(white_noise(2.0, seed=7))

    def test_too_short_input(self):
        with pytest.raises(ValueError, match="at least 1 s"):
            estimate_rt60(white_noise(0.5, seed=8))

    def test_estimates_stay_in_bounds(self):
        for seed in range(3):
            est = estimate_rt60(reverberant_bursts(0.8, seed=seed))
            assert RT60_MIN <= est.rt60_s <= RT60_MAX

    def test_convolved_bursts_match_rir_target(self):
        wet = apply_rir(burst_train(seed=7), synthetic_rir(0.4, seed=8))
        est = estimate_rt60(wet)
        assert 0.25 <= est.rt60_s <= 0.6


class TestCompare:
    def test_reports_nearer_waveform(self):
        a = reverberant_bursts(0.50, seed=1)
        b = reverberant_bursts(0.45, seed=2)
        c = reverberant_bursts(0.15, seed=3)
        report = compare_rt60(a, b, c)
        assert report.closer_to == "b"
        assert report.rt60_a == pytest.approx(0.5, rel=0.15)
        assert report.rt60_c == pytest.approx(0.15, rel=0.25)

    def test_symmetric_case_is_tie(self):
        a = reverberant_bursts(0.5, seed=4)
        b = reverberant_bursts(0.3, seed=9)
        report = compare_rt60(a, b, b)
        assert report.closer_to == "tie"
        assert report.rt60_b == report.rt60_c

    def test_order_flip(self):
        a = reverberant_bursts(0.50, seed=1)
        b = reverberant_bursts(0.45, seed=2)
        c = reverberant_bursts(0.15, seed=3)
        flipped = compare_rt60(a, c, b)
        assert flipped.closer_to == "c"


class TestPlot:
    def test_groups_by_label_in_first_seen_order(self, tmp_path):
        estimates = [
            ("near", Rt60Estimate(0.15, 1.0, 3)),
            ("far", Rt60Estimate(0.80, 1.0, 2)),
            ("near", Rt60Estimate(0.18, 0.8, 2)),
        ]
        path = tmp_path / "rt60.svg"
        emit_rt60_plot(estimates, path)
        text = path.read_text()
        assert text.startswith("<svg")
        assert text.index(">near<") < text.index(">far<")
        # three points drawn
        assert text.count("<circle") == 3

    def test_empty_estimates_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_rt60_plot([], tmp_path / "rt60.svg")
