"""Block serialization for the JSON wire format.

Factor blocks travel as base64-encoded little-endian float32. The cast
to float32 is part of the contract: a block that crosses the wire and
comes back is the float32 rounding of the original, which is why the
one-call conversion route applies the same cast internally.
"""
import base64
import binascii

import numpy as np

from .model import BLOCK_NAMES


class WireError(ValueError):
    """Payload violates the block wire format."""


def encode_block(arr: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def decode_block(text: str, rows: int, cols: int, name: str) -> np.ndarray:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise WireError(f"{name} is not valid base64: {exc}") from exc
    if len(raw) != 4 * rows * cols:
        raise WireError(
            f"{name} holds {len(raw)} bytes, expected {4 * rows * cols} "
            f"({rows}x{cols} float32)"
        )
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(rows, cols)


def wire_cast(arr: np.ndarray) -> np.ndarray:
    """The float32 round-trip a block undergoes when serialized."""
    return np.asarray(arr, dtype="<f4").astype(np.float64)


def factorized_payload(blocks: dict, dims: dict) -> dict:
    """JSON body for a factorized utterance; speaker serialized as 1xD."""
    t = int(blocks["prosody"].shape[0])
    return {
        "T": t,
        "dims": {name: int(dims[name]) for name in BLOCK_NAMES},
        "prosody": encode_block(blocks["prosody"]),
        "content": encode_block(blocks["content"]),
        "speaker": encode_block(blocks["speaker"].reshape(1, -1)),
        "residual": encode_block(blocks["residual"]),
    }


def parse_factorized(body: dict, model_dims: dict) -> dict:
    """Decode and shape-check a factorized JSON body against model dims.

    Returns float64 blocks with speaker flattened to 1-D. Raises
    WireError for structural problems; finiteness is the caller's
    concern (it maps to a different status code).
    """
    dims = body["dims"]
    for name in BLOCK_NAMES:
        if int(dims[name]) != int(model_dims[name]):
            raise WireError(
                f"dims mismatch for {name}: request {dims[name]}, "
                f"model {model_dims[name]}"
            )
    t = int(body["T"])
    if t < 1:
        raise WireError(f"T must be positive, got {t}")
    blocks = {
        "prosody": decode_block(body["prosody"], t, model_dims["prosody"], "prosody"),
        "content": decode_block(body["content"], t, model_dims["content"], "content"),
        "residual": decode_block(body["residual"], t, model_dims["residual"], "residual"),
        "speaker": decode_block(body["speaker"], 1, model_dims["speaker"], "speaker")[0],
    }
    return blocks
