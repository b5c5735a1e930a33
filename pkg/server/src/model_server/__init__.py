"""Reference oracle server for the bbopt wire protocol."""

from .bbam import BbamError, DenseModel, load_bbam
from .client import ServerUnavailable, healthcheck, request_logits
from .models import TORCHVISION_MODELS, Backend, load_backend
from .server import ModelServer, ServerConfig, serve

__all__ = [
    "Backend",
    "BbamError",
    "DenseModel",
    "ModelServer",
    "ServerConfig",
    "ServerUnavailable",
    "TORCHVISION_MODELS",
    "healthcheck",
    "load_backend",
    "load_bbam",
    "request_logits",
    "serve",
]

__version__ = "0.1.0"
