"""HTTP inference service exposing a factorized speech codec.

The service wraps a single codec model behind four routes: /health for
capability discovery, /v1/disentangle and /v1/synthesize for the two
codec directions, and /v1/convert for server-side speaker substitution.
Block payloads travel as base64 float32; audio travels as WAV bodies.
"""
from .app import create_app
from .model import StubFacodecModel, load_model

__all__ = ["create_app", "load_model", "StubFacodecModel"]
