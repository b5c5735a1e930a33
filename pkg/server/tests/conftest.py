import pathlib

import pytest

from model_server import ModelServer, ServerConfig

# fixture files are shared through their on-disk formats, not through code
PRIMARY_FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures"
MLP_PATH = PRIMARY_FIXTURES / "mlp_8x8_k4.bbam"


@pytest.fixture(scope="session")
def mlp_server():
    srv = ModelServer(ServerConfig(model=f"builtin:{MLP_PATH}", port=0)).start()
    yield srv
    srv.shutdown()
