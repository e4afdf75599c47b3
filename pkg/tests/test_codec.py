"""Toy codec algebra: factorization shapes, locality, and round-trips."""
import numpy as np
import pytest
from dataclasses import replace

from faraug.audio import Waveform
from faraug.codec import (
    BLOCK_DIMS,
    CodecBackend,
    FactorizedSpeech,
    ToyCodecBackend,
    convert_speaker,
    read_fspc,
    voice_convert,
    write_fspc,
)
from faraug.synth import harmonic_tone, speech_like, white_noise


class TestDisentangle:
    def test_shapes_one_second(self, toy_codec, stationary_wave):
        f = toy_codec.disentangle(stationary_wave)
        assert f.n_frames == 98
        assert f.dims == BLOCK_DIMS == (8, 32, 16, 24)
        assert f.prosody.shape == (98, 8)
        assert f.content.shape == (98, 32)
        assert f.speaker.shape == (16,)
        assert f.residual.shape == (98, 24)
        assert f.backend_id == toy_codec.backend_id
        assert np.linalg.norm(f.speaker) == pytest.approx(1.0, abs=1e-12)

    def test_deterministic(self, toy_codec, stationary_wave):
        a = toy_codec.disentangle(stationary_wave)
        b = toy_codec.disentangle(stationary_wave)
        np.testing.assert_array_equal(a.prosody, b.prosody)
        np.testing.assert_array_equal(a.speaker, b.speaker)

    def test_protocol_conformance(self, toy_codec):
        assert isinstance(toy_codec, CodecBackend)

    def test_too_short_input(self, toy_codec):
        with pytest.raises(ValueError):
            toy_codec.disentangle(Waveform(np.ones(100) * 0.1, 16000))


class TestRoundTrip:
    def test_stationary_rms(self, toy_codec, stationary_wave):
        y = toy_codec.synthesize(toy_codec.disentangle(stationary_wave))
        n = min(len(y), len(stationary_wave))
        x = stationary_wave.samples[:n]
        err = np.sqrt(np.mean((y.samples[:n] - x) ** 2) / np.mean(x ** 2))
        assert err <= 0.05

    def test_reextraction_consistency(self, toy_codec, stationary_wave):
        f = toy_codec.disentangle(stationary_wave)
        f2 = toy_codec.disentangle(toy_codec.synthesize(f))
        cos = float(f.speaker @ f2.speaker)
        assert cos >= 1.0 - 1e-6

    def test_synthesize_length(self, toy_codec, stationary_wave):
        f = toy_codec.disentangle(stationary_wave)
        y = toy_codec.synthesize(f)
        # output covers the analyzed span: (T - 1) * hop + win samples
        assert len(y) == (f.n_frames - 1) * 160 + 400

    def test_dims_must_match_backend(self, toy_codec):
        f = FactorizedSpeech(
            prosody=np.zeros((4, 3)), content=np.zeros((4, 2)),
            speaker=np.ones(2) / np.sqrt(2), residual=np.zeros((4, 5)),
            frame_shift_s=0.01, sample_rate=16000, backend_id="other")
        with pytest.raises(ValueError, match="dims"):
            toy_codec.synthesize(f)


class TestConvertSpeaker:
    def test_only_speaker_block_changes(self, toy_codec, speech_pair):
        a, b = speech_pair
        f_a = toy_codec.disentangle(a)
        spk_b = toy_codec.disentangle(b).speaker
        g = convert_speaker(f_a, spk_b)
        np.testing.assert_array_equal(g.prosody, f_a.prosody)
        np.testing.assert_array_equal(g.content, f_a.content)
        np.testing.assert_array_equal(g.residual, f_a.residual)
        np.testing.assert_array_equal(g.speaker, spk_b)
        assert g.aux == f_a.aux

    def test_self_conversion_is_identity(self, toy_codec, stationary_wave):
        f = toy_codec.disentangle(stationary_wave)
        g = convert_speaker(f, f.speaker)
        np.testing.assert_array_equal(g.speaker, f.speaker)
        y_f = toy_codec.synthesize(f)
        y_g = toy_codec.synthesize(g)
        np.testing.assert_array_equal(y_f.samples, y_g.samples)

    def test_normalizes_unnormalized_target(self, toy_codec, stationary_wave):
        f = toy_codec.disentangle(stationary_wave)
        g = convert_speaker(f, f.speaker * 3.0)
        assert np.linalg.norm(g.speaker) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_targets(self, toy_codec, stationary_wave):
        f = toy_codec.disentangle(stationary_wave)
        with pytest.raises(ValueError, match="dim mismatch"):
            convert_speaker(f, np.ones(3))
        with pytest.raises(ValueError, match="non-finite"):
            convert_speaker(f, np.full(16, np.nan))
        with pytest.raises(ValueError, match="zero norm"):
            convert_speaker(f, np.zeros(16))

    def test_conversion_moves_identity(self, toy_codec, speech_pair):
        a, b = speech_pair
        converted = voice_convert(toy_codec, a, b)
        f_conv = toy_codec.disentangle(converted)
        spk_b = toy_codec.disentangle(b).speaker
        spk_a = toy_codec.disentangle(a).speaker
        assert float(f_conv.speaker @ spk_b) > float(f_conv.speaker @ spk_a)


class TestValidate:
    def _f(self, **kw):
        base = dict(
            prosody=np.zeros((4, 8)), content=np.zeros((4, 32)),
            speaker=np.ones(16) / 4.0, residual=np.zeros((4, 24)),
            frame_shift_s=0.01, sample_rate=16000, backend_id="x")
        base.update(kw)
        return FactorizedSpeech(**base)

    def test_accepts_consistent_blocks(self):
        self._f().validate()

    def test_rejects_frame_mismatch(self):
        with pytest.raises(ValueError):
            self._f(content=np.zeros((5, 32))).validate()

    def test_rejects_nonfinite(self):
        bad = np.zeros((4, 8))
        bad[0, 0] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            self._f(prosody=bad).validate()


class TestFspcContainer:
    def test_round_trip(self, toy_codec, stationary_wave, tmp_path):
        f = toy_codec.disentangle(stationary_wave)
        path = tmp_path / "utt.fspc"
        write_fspc(f, path)
        g = read_fspc(path)
        assert g.backend_id == f.backend_id
        assert g.n_frames == f.n_frames
        for name in ("prosody", "content", "speaker", "residual"):
            np.testing.assert_array_equal(
                getattr(g, name),
                getattr(f, name).astype("<f4").astype(np.float64))

    def test_aux_not_serialized(self, toy_codec, stationary_wave, tmp_path):
        f = toy_codec.disentangle(stationary_wave)
        assert f.aux  # the toy backend stores reconstruction detail here
        path = tmp_path / "utt.fspc"
        write_fspc(f, path)
        assert read_fspc(path).aux == {}

    def test_rejects_foreign_bytes(self, tmp_path):
        path = tmp_path / "bad.fspc"
        path.write_bytes(b"not a container")
        with pytest.raises(ValueError, match="FSPC1"):
            read_fspc(path)

    def test_rejects_truncation(self, toy_codec, stationary_wave, tmp_path):
        f = toy_codec.disentangle(stationary_wave)
        path = tmp_path / "utt.fspc"
        write_fspc(f, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ValueError, match="truncated"):
            read_fspc(path)


class TestSpeakerSeparation:
    def test_same_speaker_closer_than_different(self, toy_codec):
        # utterance changes (same speaker seed) perturb the vector less
        # than speaker changes
        same = []
        diff = []
        for s in range(4):
            a = toy_codec.disentangle(speech_like(0.8, speaker_seed=s, seed=10 + s))
            b = toy_codec.disentangle(speech_like(0.8, speaker_seed=s, seed=50 + s))
            c = toy_codec.disentangle(speech_like(0.8, speaker_seed=99 + s, seed=90 + s))
            same.append(float(a.speaker @ b.speaker))
            diff.append(float(a.speaker @ c.speaker))
        assert np.mean(same) > np.mean(diff)
