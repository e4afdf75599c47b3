"""Codec models behind the service.

A model exposes analyze/synthesize over float64 sample arrays plus the
capability metadata that /health reports. Two implementations: a frozen
deterministic stub for contract testing and fixture generation, and a
lazy loader for a released checkpoint whose dims and determinism are
discovered at load time rather than assumed.
"""
from __future__ import annotations

import os

import numpy as np

ENV_CHECKPOINT = "FACODEC_CHECKPOINT"

BLOCK_NAMES = ("prosody", "content", "speaker", "residual")

_STUB_SEED = 0x5EED


class ModelError(ValueError):
    """Input a model cannot factorize or synthesize."""


class StubFacodecModel:
    """Deterministic linear stand-in with the real model's interface.

    Analysis projects 400-sample frames (hop 160) onto fixed random
    bases: 25 columns split 5/11/9 into prosody/content/residual, plus a
    separate 7-column speaker basis whose time-mean, L2-normalized, is
    the utterance speaker vector. Synthesis maps each frame's
    concatenated blocks back to 160 output samples, with a zero tail
    standing in for the analysis window overhang. All parameters come
    from one seeded stream, so every deployment is bit-identical.
    """

    backend_id = "facodec-stub-v1"
    model_revision = "stub-0"
    sample_rate = 16000
    deterministic = True
    dims = {"prosody": 5, "content": 11, "speaker": 7, "residual": 9}

    WIN = 400
    HOP = 160

    def __init__(self) -> None:
        rng = np.random.default_rng(_STUB_SEED)
        self._analysis = rng.standard_normal((self.WIN, 25)) / 20
        self._speaker_basis = rng.standard_normal((self.WIN, 7)) / 20
        self._synth = rng.standard_normal((self.HOP, 32)) / 8

    @property
    def frame_shift_s(self) -> float:
        return self.HOP / self.sample_rate

    def analyze(self, samples: np.ndarray) -> dict[str, np.ndarray]:
        n = samples.size
        if n < self.WIN:
            raise ModelError(
                f"audio too short to factorize: {n} samples < one "
                f"{self.WIN}-sample frame"
            )
        t = 1 + (n - self.WIN) // self.HOP
        frames = np.stack([samples[i * self.HOP : i * self.HOP + self.WIN]
                           for i in range(t)])
        feats = frames @ self._analysis
        spk_frames = frames @ self._speaker_basis
        spk_mean = spk_frames.mean(axis=0)
        norm = float(np.linalg.norm(spk_mean))
        if norm == 0.0:
            raise ModelError("degenerate audio: speaker projection is zero")
        return {
            "prosody": feats[:, 0:5],
            "content": feats[:, 5:16],
            "residual": feats[:, 16:25],
            "speaker": spk_mean / norm,
        }

    def synthesize(self, prosody: np.ndarray, content: np.ndarray,
                   residual: np.ndarray, speaker: np.ndarray) -> np.ndarray:
        t = prosody.shape[0]
        stacked = np.concatenate(
            [prosody, content, residual,
             np.broadcast_to(speaker, (t, speaker.size))], axis=1)
        core = (stacked @ self._synth.T).reshape(-1)
        return np.concatenate([core, np.zeros(self.WIN - self.HOP)])


class CheckpointFacodecModel:
    """Adapter around a released TorchScript codec checkpoint.

    Expects a scripted module with analyze(wav) -> (prosody, content,
    speaker, residual) and synthesize(prosody, content, speaker,
    residual) -> wav methods plus sample_rate / frame_shift_s /
    revision attributes. Dims and determinism are not trusted from
    metadata: both are probed with a short signal at load time and the
    results surface through /health.
    """

    backend_id = "facodec-checkpoint"

    def __init__(self, path: str) -> None:
        import torch  # heavy import deferred until a checkpoint is configured

        self._torch = torch
        self._module = torch.jit.load(path, map_location="cpu").eval()
        self.sample_rate = int(self._module.sample_rate)
        self.frame_shift_s = float(self._module.frame_shift_s)
        self.model_revision = str(self._module.revision)

        probe = np.sin(np.arange(self.sample_rate) * (2 * np.pi * 220 / self.sample_rate))
        first = self.analyze(probe)
        second = self.analyze(probe)
        self.dims = {name: int(first[name].shape[-1]) for name in BLOCK_NAMES}
        self.deterministic = all(
            np.array_equal(first[name], second[name]) for name in BLOCK_NAMES)

    def _tensor(self, arr: np.ndarray):
        return self._torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32))

    def analyze(self, samples: np.ndarray) -> dict[str, np.ndarray]:
        with self._torch.inference_mode():
            out = self._module.analyze(self._tensor(samples))
        blocks = dict(zip(BLOCK_NAMES, (b.numpy().astype(np.float64) for b in out)))
        if blocks["speaker"].ndim > 1:
            blocks["speaker"] = blocks["speaker"].reshape(-1)
        return blocks

    def synthesize(self, prosody, content, residual, speaker) -> np.ndarray:
        with self._torch.inference_mode():
            out = self._module.synthesize(
                self._tensor(prosody), self._tensor(content),
                self._tensor(speaker), self._tensor(residual))
        return out.numpy().astype(np.float64).reshape(-1)


def load_model(checkpoint: str | None = None):
    """Checkpoint model when one is configured, stub otherwise."""
    path = checkpoint or os.environ.get(ENV_CHECKPOINT)
    if path:
        return CheckpointFacodecModel(path)
    return StubFacodecModel()
