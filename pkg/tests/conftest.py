"""Shared fixtures: deterministic waveforms and tiny on-disk corpora."""
import logging

import numpy as np
import pytest

from faraug.audio import Waveform
from faraug.codec import ToyCodecBackend
from faraug.embedder import ToyEmbedderBackend
from faraug.synth import build_corpus, harmonic_tone, white_noise
from faraug.classical import add_noise_snr


@pytest.fixture(scope="session", autouse=True)
def _null_log_handler():
    # keeps cli.main()'s basicConfig from attaching a stream handler to
    # whatever sys.stderr happens to be during the first test
    root = logging.getLogger()
    handler = logging.NullHandler()
    root.addHandler(handler)
    yield
    root.removeHandler(handler)


@pytest.fixture(scope="session")
def toy_codec():
    return ToyCodecBackend()


@pytest.fixture(scope="session")
def toy_embedder():
    return ToyEmbedderBackend()


@pytest.fixture(scope="session")
def stationary_wave():
    # harmonic tone plus a little noise: stationary, so the codec's
    # per-frame truncation of detail coefficients barely hurts
    clean = harmonic_tone(100.0, 1.0)
    return add_noise_snr(clean, white_noise(1.0, seed=7, amplitude=0.3), 20.0)


@pytest.fixture(scope="session")
def speech_pair():
    from faraug.synth import speech_like

    a = speech_like(1.0, speaker_seed=11, seed=100)
    b = speech_like(1.0, speaker_seed=22, seed=200)
    return a, b


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """Two tiny single-domain corpora: 3 far speakers, 2 near speakers."""
    root = tmp_path_factory.mktemp("corpus")
    far = build_corpus(root / "far", n_speakers=3, utts_per_speaker=2,
                       domain="far", seed=10, duration_s=0.5,
                       speaker_prefix="far")
    near = build_corpus(root / "near", n_speakers=2, utts_per_speaker=2,
                        domain="near", seed=20, duration_s=0.5,
                        speaker_prefix="near")
    return far, near


def assert_waveform_equal(a: Waveform, b: Waveform):
    assert a.sample_rate == b.sample_rate
    np.testing.assert_array_equal(a.samples, b.samples)
