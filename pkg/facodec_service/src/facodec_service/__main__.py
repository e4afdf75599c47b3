"""Serve the codec over HTTP.

The listen address comes from CODEC_BIND ("host:port", default
127.0.0.1:8300). The model is chosen by FACODEC_CHECKPOINT: a path loads
that checkpoint, absence selects the deterministic stub.
"""
import os

import uvicorn

from .app import create_app

DEFAULT_BIND = "127.0.0.1:8300"


def main() -> int:
    bind = os.environ.get("CODEC_BIND", DEFAULT_BIND)
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise SystemExit(f"CODEC_BIND must be host:port, got {bind!r}")
    uvicorn.run(create_app(), host=host, port=int(port))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
