"""Minimal protocol client: request helper and healthcheck."""

from __future__ import annotations

import base64
import json
import socket

import numpy as np

__all__ = ["ServerUnavailable", "request_logits", "healthcheck"]


class ServerUnavailable(RuntimeError):
    """The server could not be reached or broke the protocol."""


def _split(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


def _roundtrip(endpoint: str, payload: dict, timeout: float) -> dict:
    try:
        with socket.create_connection(_split(endpoint), timeout=timeout) as sock:
            sock.sendall(json.dumps(payload).encode("utf-8") + b"\n")
            with sock.makefile("rb") as fh:
                line = fh.readline()
        if not line:
            raise ServerUnavailable(f"{endpoint}: connection closed without a response")
        return json.loads(line.decode("utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ServerUnavailable(f"{endpoint}: {exc}") from exc


def request_logits(endpoint: str, pixels: np.ndarray, req_id: int = 1,
                   timeout: float = 30.0) -> dict:
    """One request/response round trip for a (c, h, w) float image."""
    arr = np.ascontiguousarray(pixels, dtype="<f4")
    payload = {
        "id": req_id,
        "shape": list(arr.shape),
        "dtype": "f32le",
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }
    return _roundtrip(endpoint, payload, timeout)


def healthcheck(endpoint: str, timeout: float = 10.0) -> tuple[str, int]:
    """Returns (model name, class count) or raises ServerUnavailable."""
    resp = _roundtrip(endpoint, {"id": 0, "shape": [0, 0, 0], "dtype": "f32le",
                                 "data": ""}, timeout)
    if resp.get("error"):
        raise ServerUnavailable(f"{endpoint}: server error: {resp['error']}")
    try:
        return str(resp["model"]), int(resp["classes"])
    except KeyError as exc:
        raise ServerUnavailable(f"{endpoint}: malformed healthcheck response") from exc
