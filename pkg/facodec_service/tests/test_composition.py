"""Conversion route vs the explicit three-call composition.

The one-call /v1/convert is a convenience, not a different computation:
with a deterministic model its output must match disentangle -> swap
speaker -> synthesize performed over the wire, byte for byte. The wire
rounds every block through float32, so equality here proves the convert
route applies the same cast internally.
"""


def _disentangle(client, wav_bytes: bytes) -> dict:
    resp = client.post("/v1/disentangle", content=wav_bytes,
                       headers={"Content-Type": "audio/wav"})
    assert resp.status_code == 200
    return resp.json()


def _synthesize(client, body: dict) -> bytes:
    resp = client.post("/v1/synthesize", json=body)
    assert resp.status_code == 200
    return resp.content


def test_convert_equals_three_call_composition(client, fixture_bytes):
    source = fixture_bytes("convert_source.wav")
    ref = fixture_bytes("convert_ref.wav")

    factors = _disentangle(client, source)
    factors["speaker"] = _disentangle(client, ref)["speaker"]
    composed = _synthesize(client, factors)

    one_call = client.post("/v1/convert", files={
        "source": ("source.wav", source, "audio/wav"),
        "speaker_ref": ("speaker_ref.wav", ref, "audio/wav"),
    })
    assert one_call.status_code == 200
    assert one_call.content == composed


def test_self_conversion_equals_plain_resynthesis(client, fixture_bytes):
    source = fixture_bytes("disentangle_request.wav")

    resynthesis = _synthesize(client, _disentangle(client, source))

    self_converted = client.post("/v1/convert", files={
        "source": ("source.wav", source, "audio/wav"),
        "speaker_ref": ("speaker_ref.wav", source, "audio/wav"),
    })
    assert self_converted.status_code == 200
    assert self_converted.content == resynthesis
