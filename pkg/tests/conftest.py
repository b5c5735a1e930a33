import json
import pathlib
import socketserver
import threading

import numpy as np
import pytest

from bbopt.datasets import load_dataset
from bbopt.oracle import load_builtin_model
from bbopt.tensors import ImageTensor, linf_distance

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
GOLDEN = pathlib.Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def mlp_oracle():
    return load_builtin_model(FIXTURES / "mlp_8x8_k4.bbam")


@pytest.fixture(scope="session")
def dataset16():
    return load_dataset(FIXTURES / "dataset_16.imgb")


@pytest.fixture(scope="session")
def linear_oracle():
    return load_builtin_model(FIXTURES / "linear_64.bbam")


@pytest.fixture(scope="session")
def linear_meta():
    meta = json.loads((FIXTURES / "linear_64_meta.json").read_text())
    model = load_builtin_model(FIXTURES / "linear_64.bbam")
    rows, bias, _ = model.layers[0]
    w = rows[0].astype(np.float64) - rows[1].astype(np.float64)
    b0 = float(bias[0] - bias[1])
    meta.update(w=w, b0=b0)
    return meta


class CountingOracle:
    """Pass-through oracle that counts forward passes."""

    serial = False

    def __init__(self, inner):
        self.inner = inner
        self.count = 0

    @property
    def num_classes(self):
        return self.inner.num_classes

    def logits(self, image):
        self.count += 1
        return self.inner.logits(image)


class CheckingOracle(CountingOracle):
    """Counts queries and records feasibility violations against an original."""

    def __init__(self, inner, original: ImageTensor, eps: float):
        super().__init__(inner)
        self.original = original
        self.eps = eps
        self.violations = 0

    def logits(self, image):
        dist = linf_distance(image, self.original)
        inside = (image.data >= 0).all() and (image.data <= 1).all()
        if dist > self.eps + 1e-6 or not inside:
            self.violations += 1
        return super().logits(image)


class LinearOracle:
    """Two-class oracle with margin_loss(logits, 0) == <w, x> + c exactly."""

    serial = False
    num_classes = 2

    def __init__(self, w, c=0.0):
        self.w = np.asarray(w, dtype=np.float64)
        self.c = float(c)

    def logits(self, image):
        x = image.data.reshape(-1).astype(np.float64)
        return np.array([float(self.w @ x) + self.c, 0.0])


class ConstantOracle:
    serial = False
    num_classes = 2

    def __init__(self, value=1.0):
        self.value = value

    def logits(self, image):
        return np.array([self.value, 0.0])


class _WireHandler(socketserver.StreamRequestHandler):
    def handle(self):
        import base64

        for raw in self.rfile:
            try:
                msg = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                continue
            req_id = msg.get("id", 0)
            try:
                shape = msg["shape"]
                data = base64.b64decode(msg["data"])
                if list(shape) == [0, 0, 0] and not data:
                    resp = {"id": req_id, "logits": [], "error": None, "model": "loopback",
                            "classes": self.server.oracle.num_classes}
                else:
                    pixels = np.frombuffer(data, dtype="<f4").reshape(shape)
                    logits = self.server.oracle.logits(ImageTensor(pixels.copy()))
                    resp = {"id": req_id, "logits": [float(v) for v in logits],
                            "classes": self.server.oracle.num_classes}
            except Exception as exc:  # noqa: BLE001 - report anything back to the client
                resp = {"id": req_id, "error": str(exc)}
            self.wfile.write(json.dumps(resp).encode("utf-8") + b"\n")
            self.wfile.flush()


class LoopbackServer:
    """In-process wire-protocol server wrapping any local oracle."""

    def __init__(self, oracle):
        self.server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), _WireHandler)
        self.server.daemon_threads = True
        self.server.oracle = oracle
        self.port = self.server.server_address[1]
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def endpoint(self):
        return f"127.0.0.1:{self.port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture()
def loopback(mlp_oracle):
    srv = LoopbackServer(mlp_oracle)
    yield srv
    srv.close()
