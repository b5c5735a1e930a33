"""Remote oracle client: newline-delimited JSON over TCP.

Request:  {"id": u64, "shape": [c,h,w], "dtype": "f32le", "data": base64(f32 LE pixels)}
Response: {"id": u64, "logits": [...], "classes": K} or {"id": u64, "error": msg}
One request per line; a connection never reorders responses.
"""

from __future__ import annotations

import base64
import json
import socket

import numpy as np

from .oracle import OracleUnavailable
from .tensors import ImageTensor

__all__ = ["RemoteOracle", "remote_oracle", "healthcheck", "encode_request", "decode_response"]


def encode_request(req_id: int, shape, data: bytes) -> bytes:
    msg = {
        "id": int(req_id),
        "shape": list(shape),
        "dtype": "f32le",
        "data": base64.b64encode(data).decode("ascii"),
    }
    return json.dumps(msg, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_response(line: bytes, expect_id: int) -> dict:
    try:
        msg = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise OracleUnavailable(f"unparseable response: {exc}") from exc
    if not isinstance(msg, dict) or "id" not in msg:
        raise OracleUnavailable("response missing id")
    if msg["id"] != expect_id:
        raise OracleUnavailable(f"response id {msg['id']} does not match request {expect_id}")
    if msg.get("error"):
        raise OracleUnavailable(f"server error: {msg['error']}")
    if "logits" not in msg:
        raise OracleUnavailable("response missing logits")
    return msg


class RemoteOracle:
    """Score oracle behind the wire protocol. One connection, strictly serial."""

    serial = True

    def __init__(self, host: str, port: int, timeout: float = 30.0) -> None:
        self.host = host
        self.port = int(port)
        self.timeout = timeout
        self.num_classes: int | None = None
        self._sock: socket.socket | None = None
        self._rfile = None
        self._next_id = 0

    def _connect(self) -> None:
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
            self._rfile = self._sock.makefile("rb")
        except OSError as exc:
            raise OracleUnavailable(f"cannot connect to {self.host}:{self.port}: {exc}") from exc

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None
                self._rfile = None

    def _round_trip(self, payload: bytes) -> bytes:
        if self._sock is None:
            self._connect()
        try:
            self._sock.sendall(payload)
            line = self._rfile.readline()
        except OSError as exc:
            self.close()
            raise OracleUnavailable(f"transport failure: {exc}") from exc
        if not line:
            self.close()
            raise OracleUnavailable("connection closed by server")
        return line

    def logits(self, image: ImageTensor) -> np.ndarray:
        req_id = self._next_id
        self._next_id += 1
        payload = encode_request(req_id, image.data.shape, image.data.astype("<f4").tobytes())
        msg = decode_response(self._round_trip(payload), req_id)
        logits = np.asarray(msg["logits"], dtype=np.float64)
        if logits.ndim != 1 or logits.size < 2 or not np.isfinite(logits).all():
            raise OracleUnavailable(f"bad logits in response (shape {logits.shape})")
        classes = msg.get("classes", logits.size)
        if self.num_classes is None:
            self.num_classes = int(classes)
        return logits


def remote_oracle(endpoint: str, timeout: float = 30.0) -> RemoteOracle:
    """Build a client from a "host:port" string."""
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return RemoteOracle(host, int(port), timeout=timeout)


def healthcheck(endpoint: str, timeout: float = 5.0) -> tuple[str | None, int]:
    """Probe a server with an empty request; returns (model name, class count).

    Uses its own throwaway connection and never touches any attack ledger.
    """
    client = remote_oracle(endpoint, timeout=timeout)
    try:
        payload = encode_request(0, (0, 0, 0), b"")
        line = client._round_trip(payload)
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise OracleUnavailable(f"unparseable healthcheck response: {exc}") from exc
        if not isinstance(msg, dict) or msg.get("id") != 0:
            raise OracleUnavailable("healthcheck response id mismatch")
        if msg.get("error"):
            raise OracleUnavailable(f"server error: {msg['error']}")
        if "classes" not in msg:
            raise OracleUnavailable("healthcheck response missing classes")
        return msg.get("model"), int(msg["classes"])
    finally:
        client.close()
