import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from facodec_service import StubFacodecModel, create_app

# wire fixtures shared with the client-side suite, checked in at repo root
FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "codec_service"


def wait_ready(client, deadline_s: float = 5.0):
    """Poll /health until background loading finishes."""
    end = time.monotonic() + deadline_s
    while time.monotonic() < end:
        resp = client.get("/health")
        if resp.status_code != 503:
            return resp
        time.sleep(0.005)
    raise TimeoutError("service did not become ready")


@pytest.fixture()
def client():
    app = create_app(model_factory=StubFacodecModel)
    with TestClient(app) as c:
        wait_ready(c)
        yield c


@pytest.fixture(scope="session")
def fixture_bytes():
    cache = {}

    def load(name: str) -> bytes:
        if name not in cache:
            cache[name] = (FIXTURES / name).read_bytes()
        return cache[name]

    return load
