"""Published wire-format schemas.

These JSON Schema documents are the service contract: clients may pin
them, and the test suite validates live responses against them.
"""
import json
from importlib import resources

NAMES = ("service_info", "factorized_speech", "error")


def load(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(f"unknown schema {name!r}; have {NAMES}")
    ref = resources.files(__package__) / f"{name}.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))
