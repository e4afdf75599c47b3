"""Speaker embeddings and the additive-angular-margin softmax objective.

The toy embedder summarizes log-mel statistics: per-channel means and
standard deviations are differenced along the channel axis (differencing
annihilates the constant log-domain shift a gain change introduces and the
smooth spectral profile that broadband signals share), projected by a
fixed seeded matrix, and L2-normalized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, runtime_checkable

import numpy as np

from .audio import Waveform
from .features import MelSpectrogram, log_mel

EMBED_DIM = 192
_PROJECTION_SEED = 0x51D2E5


@dataclass
class SpeakerEmbedding:
    vector: np.ndarray
    utt_id: str = ""

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if self.vector.ndim != 1:
            raise ValueError("embedding must be a vector")


@runtime_checkable
class EmbedderBackend(Protocol):
    backend_id: str
    dim: int

    def embed(self, w: Waveform) -> np.ndarray: ...


def _projection() -> np.ndarray:
    rng = np.random.default_rng(_PROJECTION_SEED)
    return rng.standard_normal((158, EMBED_DIM))


class ToyEmbedderBackend:
    """Deterministic stats-based embedder (no training, no model files)."""

    backend_id = "toy-stats-v1"
    dim = EMBED_DIM

    def __init__(self) -> None:
        self._proj = _projection()

    def embed(self, w: Waveform) -> np.ndarray:
        mel = log_mel(w)
        return self.embed_features(mel)

    def embed_features(self, mel: MelSpectrogram) -> np.ndarray:
        frames = mel.frames
        mean = frames.mean(axis=0)
        std = frames.std(axis=0)
        stats = np.concatenate([np.diff(mean), np.diff(std)])
        vec = stats @ self._proj
        norm = float(np.linalg.norm(vec))
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError(
                "degenerate input: log-mel statistics carry no channel structure"
            )
        return vec / norm


def embed(backend: EmbedderBackend, w: Waveform, utt_id: str = "") -> SpeakerEmbedding:
    """Embed a waveform; the vector is unit-norm by construction."""
    return SpeakerEmbedding(backend.embed(w), utt_id)


# ---------------------------------------------------------------------------
# Embedding dumps: TSV (utt_id + repr floats) or the binary feature record
# format with shape (1, dim).


def save_embeddings_tsv(path: str | Path, embeddings: Iterable[SpeakerEmbedding]) -> None:
    lines = []
    for e in embeddings:
        values = "\t".join(repr(float(v)) for v in e.vector)
        lines.append(f"{e.utt_id}\t{values}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_embeddings_tsv(path: str | Path) -> dict[str, np.ndarray]:
    table: dict[str, np.ndarray] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        table[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
    return table


def save_embeddings_bin(path: str | Path, embeddings: Iterable[SpeakerEmbedding]) -> None:
    from .features import write_feature_dump

    items = [
        (e.utt_id, MelSpectrogram(e.vector[None, :], 0.0, 0.0, 0))
        for e in embeddings
    ]
    write_feature_dump(path, items)


def load_embeddings_bin(path: str | Path) -> dict[str, np.ndarray]:
    from .features import iter_feature_dump

    return {utt: mel.frames[0] for utt, mel in iter_feature_dump(path)}


# ---------------------------------------------------------------------------
# Additive angular margin softmax (margin on the target angle, scaled).


@dataclass
class AamParams:
    """Margin m (radians), scale s, and class weight rows (C, D).

    Weight rows are unit-normalized at construction.
    """

    weights: np.ndarray
    margin: float = 0.2
    scale: float = 30.0

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] < 2:
            raise ValueError("weights must be (C, D) with at least two classes")
        if not 0.0 <= self.margin < math.pi / 2:
            raise ValueError(f"margin must be in [0, pi/2), got {self.margin}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        norms = np.linalg.norm(self.weights, axis=1)
        if np.any(norms == 0):
            raise ValueError("class weight rows must be nonzero")
        self.weights = self.weights / norms[:, None]

    @property
    def n_classes(self) -> int:
        return int(self.weights.shape[0])


def aam_softmax_loss(e: np.ndarray, label: int,
                     params: AamParams) -> tuple[float, np.ndarray]:
    """Loss and analytic gradient of the margin-softmax objective w.r.t. e.

    The embedding is normalized internally; cos(theta_y + m) expands as
    cos*cos(m) - sin*sin(m) with sin(theta) = sqrt(max(0, 1 - cos^2)).
    The gradient chains through the normalization, so it matches finite
    differences on the raw input vector. Exactly aligned embeddings
    (sin(theta_y) = 0) sit on a cone point of the objective; the gradient
    there uses a clamped sin and is not meaningful.
    """
    e = np.asarray(e, dtype=np.float64)
    w = params.weights
    if e.shape != (w.shape[1],):
        raise ValueError(f"embedding dim {e.shape} does not match weights {w.shape}")
    if not 0 <= label < params.n_classes:
        raise ValueError(f"label {label} out of range for {params.n_classes} classes")
    r = float(np.linalg.norm(e))
    if r == 0.0:
        raise ValueError("embedding has zero norm")

    e_hat = e / r
    cos = np.clip(w @ e_hat, -1.0, 1.0)
    cos_y = float(cos[label])
    sin_y = math.sqrt(max(0.0, 1.0 - cos_y * cos_y))
    cos_m, sin_m = math.cos(params.margin), math.sin(params.margin)

    logits = params.scale * cos
    logits[label] = params.scale * (cos_y * cos_m - sin_y * sin_m)

    peak = float(np.max(logits))
    lse = peak + math.log(float(np.sum(np.exp(logits - peak))))
    loss = lse - float(logits[label])

    # dL/dlogit = softmax - onehot; chain through the margin and the
    # normalization of e.
    p = np.exp(logits - lse)
    dlogit = p.copy()
    dlogit[label] -= 1.0
    dcos = dlogit * params.scale
    dcos[label] *= cos_m + sin_m * cos_y / max(sin_y, 1e-12)
    grad_hat = dcos @ w
    grad = (grad_hat - e_hat * float(grad_hat @ e_hat)) / r
    return loss, grad
