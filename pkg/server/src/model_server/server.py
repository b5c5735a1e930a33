"""TCP server speaking the newline-delimited JSON oracle protocol.

Requests: {"id": u64, "shape": [c,h,w], "dtype": "f32le", "data": base64 of
little-endian f32 pixels}. Responses: {"id", "logits", "classes"}, or
{"id", "error"} on any per-request failure. A request with shape [0,0,0]
and empty data is a healthcheck and additionally reports the model name.

One thread per connection; the model itself is guarded by a single lock,
so responses on a connection never reorder relative to its requests.
"""

from __future__ import annotations

import base64
import json
import logging
import socketserver
import threading
from dataclasses import dataclass

import numpy as np

from .models import Backend, load_backend

__all__ = ["ServerConfig", "ModelServer", "serve"]

log = logging.getLogger("model_server")


@dataclass(frozen=True)
class ServerConfig:
    model: str  # builtin:PATH | inception_v3 | resnet50 | vgg16_bn
    port: int = 9090
    host: str = "127.0.0.1"
    device: str = "cpu"


def _handle_line(line: bytes, backend: Backend, lock: threading.Lock) -> dict:
    req_id = 0
    try:
        msg = json.loads(line.decode("utf-8"))
        if not isinstance(msg, dict):
            raise ValueError("request must be a JSON object")
        req_id = int(msg.get("id", 0))
        shape = msg["shape"]
        dtype = msg.get("dtype", "f32le")
        if dtype != "f32le":
            raise ValueError(f"unsupported dtype {dtype!r}")
        data = base64.b64decode(msg["data"], validate=True)
        if list(shape) == [0, 0, 0] and not data:
            return {"id": req_id, "logits": [], "classes": backend.num_classes,
                    "error": None, "model": backend.name}
        pixels = np.frombuffer(data, dtype="<f4")
        expected = int(np.prod(shape))
        if pixels.size != expected:
            raise ValueError(f"data holds {pixels.size} floats, shape needs {expected}")
        pixels = pixels.reshape(shape).astype(np.float64)
        with lock:
            logits = backend.logits(pixels)
        return {"id": req_id, "logits": [float(v) for v in logits],
                "classes": backend.num_classes}
    except Exception as exc:  # noqa: BLE001 - every failure becomes a protocol error
        return {"id": req_id, "error": str(exc)}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for raw in self.rfile:
            line = raw.strip()
            if not line:
                continue
            resp = _handle_line(line, self.server.backend, self.server.model_lock)
            self.wfile.write(json.dumps(resp).encode("utf-8") + b"\n")
            self.wfile.flush()


class _TcpServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class ModelServer:
    """Bound server with start/shutdown hooks (used by serve() and tests)."""

    def __init__(self, cfg: ServerConfig, backend: Backend | None = None) -> None:
        self.cfg = cfg
        self.backend = backend if backend is not None else load_backend(cfg.model, cfg.device)
        self._server = _TcpServer((cfg.host, cfg.port), _Handler)
        self._server.backend = self.backend
        self._server.model_lock = threading.Lock()
        self.host, self.port = self._server.server_address[:2]
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> "ModelServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        log.info("serving %s on %s", self.backend.name, self.endpoint)
        return self

    def run_forever(self) -> None:
        log.info("serving %s on %s", self.backend.name, self.endpoint)
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()


def serve(cfg: ServerConfig) -> None:
    """Load the model, bind, and serve until interrupted."""
    ModelServer(cfg).run_forever()
