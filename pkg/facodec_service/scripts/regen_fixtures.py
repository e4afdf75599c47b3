"""Regenerates the golden wire fixtures shared with the client test suite.

Every fixture is produced by the live service running the stub model, so
the files document exactly what crosses the wire: three request WAVs,
the /health body, the disentangle response for the request WAV (which is
byte-identical to the synthesize request that replays it), and the two
audio responses. Run with --check to verify an existing fixture
directory instead of writing.
"""
import argparse
import sys
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from facodec_service import StubFacodecModel, create_app
from facodec_service.wav import encode_float32

RATE = 16000


def mix(n: int, seed: int, f0: float) -> np.ndarray:
    # fixed recipe behind every request fixture in the replay corpus
    t = np.arange(n) / RATE
    rng = np.random.default_rng(seed)
    return (0.4 * np.sin(2 * np.pi * f0 * t)
            + 0.2 * np.sin(2 * np.pi * 2.7 * f0 * t + 1.0)
            + 0.05 * rng.standard_normal(n))


def build_fixtures() -> dict[str, bytes]:
    disentangle_request = encode_float32(mix(8000, 123, 220), RATE)
    convert_source = encode_float32(mix(6400, 321, 180), RATE)
    convert_ref = encode_float32(mix(7200, 555, 310), RATE)

    app = create_app(model_factory=StubFacodecModel)
    with TestClient(app) as client:
        health = client.get("/health")
        health.raise_for_status()
        disentangle = client.post(
            "/v1/disentangle", content=disentangle_request,
            headers={"Content-Type": "audio/wav"})
        disentangle.raise_for_status()
        synthesize = client.post(
            "/v1/synthesize", content=disentangle.content,
            headers={"Content-Type": "application/json"})
        synthesize.raise_for_status()
        convert = client.post("/v1/convert", files={
            "source": ("source.wav", convert_source, "audio/wav"),
            "speaker_ref": ("speaker_ref.wav", convert_ref, "audio/wav"),
        })
        convert.raise_for_status()

    return {
        "health.json": health.content,
        "disentangle_request.wav": disentangle_request,
        "disentangle_response.json": disentangle.content,
        "synthesize_request.json": disentangle.content,
        "synthesize_response.wav": synthesize.content,
        "convert_source.wav": convert_source,
        "convert_ref.wav": convert_ref,
        "convert_response.wav": convert.content,
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    group = ap.add_mutually_exclusive_group(required=True)
    group.add_argument("--out", help="directory to write fixtures into")
    group.add_argument("--check", help="existing fixture directory to verify")
    args = ap.parse_args(argv)

    fixtures = build_fixtures()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, blob in fixtures.items():
            (out / name).write_bytes(blob)
        print(f"wrote {len(fixtures)} fixtures to {out}")
        return 0

    bad = []
    root = Path(args.check)
    for name, blob in fixtures.items():
        path = root / name
        if not path.exists():
            bad.append(f"{name}: missing")
        elif path.read_bytes() != blob:
            bad.append(f"{name}: differs ({path.stat().st_size} bytes on "
                       f"disk, {len(blob)} regenerated)")
    for line in bad:
        print(f"mismatch: {line}", file=sys.stderr)
    if not bad:
        print(f"all {len(fixtures)} fixtures match {root}")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
