import json
import socket
import threading

import numpy as np
import pytest

from bbopt.oracle import OracleUnavailable
from bbopt.remote import healthcheck, remote_oracle
from bbopt.rng import RngStream
from bbopt.tensors import ImageTensor

from conftest import LoopbackServer


class _EchoServer:
    """Replies to every line with a canned payload."""

    def __init__(self, payload_for):
        self.payload_for = payload_for
        self.sock = socket.socket()
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(1)
        self.port = self.sock.getsockname()[1]
        self.thread = threading.Thread(target=self._serve, daemon=True)
        self.thread.start()

    def _serve(self):
        try:
            conn, _ = self.sock.accept()
        except OSError:
            return
        with conn, conn.makefile("rb") as rf:
            for line in rf:
                msg = json.loads(line)
                conn.sendall(json.dumps(self.payload_for(msg)).encode() + b"\n")

    def close(self):
        self.sock.close()


def test_fixed_logits_echo():
    srv = _EchoServer(lambda m: {"id": m["id"], "logits": [1.0, 2.0, 3.0], "classes": 3})
    try:
        client = remote_oracle(f"127.0.0.1:{srv.port}")
        out = client.logits(ImageTensor(np.zeros((1, 2, 2), dtype=np.float32)))
        assert np.allclose(out, [1, 2, 3])
        assert client.num_classes == 3
        client.close()
    finally:
        srv.close()


def test_missing_field_is_unavailable():
    srv = _EchoServer(lambda m: {"id": m["id"]})
    try:
        client = remote_oracle(f"127.0.0.1:{srv.port}")
        with pytest.raises(OracleUnavailable, match="logits"):
            client.logits(ImageTensor(np.zeros((1, 1, 1), dtype=np.float32)))
        client.close()
    finally:
        srv.close()


def test_id_mismatch_is_unavailable():
    srv = _EchoServer(lambda m: {"id": m["id"] + 5, "logits": [0.0, 1.0], "classes": 2})
    try:
        client = remote_oracle(f"127.0.0.1:{srv.port}")
        with pytest.raises(OracleUnavailable, match="id"):
            client.logits(ImageTensor(np.zeros((1, 1, 1), dtype=np.float32)))
        client.close()
    finally:
        srv.close()


def test_unreachable_endpoint():
    client = remote_oracle("127.0.0.1:1")  # nothing listens on port 1
    with pytest.raises(OracleUnavailable):
        client.logits(ImageTensor(np.zeros((1, 1, 1), dtype=np.float32)))


def test_loopback_matches_local(mlp_oracle, loopback):
    client = remote_oracle(loopback.endpoint)
    rng = RngStream(99)
    for _ in range(10):
        img = ImageTensor(rng.uniform(0, 1, (1, 8, 8)))
        remote = client.logits(img)
        local = mlp_oracle.logits(img)
        assert np.allclose(remote, local, atol=1e-6)
    client.close()


def test_healthcheck(loopback):
    model, classes = healthcheck(loopback.endpoint)
    assert model == "loopback"
    assert classes == 4


def test_bad_endpoint_string():
    with pytest.raises(ValueError):
        remote_oracle("nonsense")
