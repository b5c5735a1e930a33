"""Model backends: the BBAM dense format and pretrained torchvision nets.

Normalization lives here, server-side: clients always send raw pixels in
[0, 1] and the backend applies the model's mean/std before the forward
pass. There is no resizing or cropping — each backend declares the exact
input shape it accepts and rejects anything else, so the preprocessing
pipeline is explicit in the healthcheck metadata instead of implicit.
"""

from __future__ import annotations

import numpy as np

from .bbam import load_bbam

__all__ = ["Backend", "TORCHVISION_MODELS", "load_backend"]

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)

TORCHVISION_MODELS = {
    # name -> (input shape, normalization mean, normalization std)
    "inception_v3": ((3, 299, 299), _IMAGENET_MEAN, _IMAGENET_STD),
    "resnet50": ((3, 224, 224), _IMAGENET_MEAN, _IMAGENET_STD),
    "vgg16_bn": ((3, 224, 224), _IMAGENET_MEAN, _IMAGENET_STD),
}


class Backend:
    """A loaded model: name, accepted input shape, class count, logits()."""

    def __init__(self, name: str, input_shape: tuple[int, ...] | None,
                 num_classes: int, fn) -> None:
        self.name = name
        self.input_shape = input_shape  # None = any shape with the right size
        self.num_classes = num_classes
        self._fn = fn

    def logits(self, pixels: np.ndarray) -> np.ndarray:
        if self.input_shape is not None and tuple(pixels.shape) != self.input_shape:
            raise ValueError(
                f"{self.name} expects input shape {list(self.input_shape)}, "
                f"got {list(pixels.shape)}"
            )
        if not np.isfinite(pixels).all():
            raise ValueError("non-finite pixels")
        return np.asarray(self._fn(pixels), dtype=np.float64).reshape(-1)


def _builtin_backend(path: str) -> Backend:
    model = load_bbam(path)

    def fn(pixels: np.ndarray) -> np.ndarray:
        return model.logits(pixels.reshape(-1))

    # a dense model accepts any (c, h, w) whose product matches its input dim
    backend = Backend(f"builtin:{path}", None, model.num_classes, fn)
    backend.in_dim = model.in_dim
    return backend


def _torch_backend(name: str, device: str) -> Backend:
    import torch
    import torchvision.models

    shape, mean, std = TORCHVISION_MODELS[name]
    factory = getattr(torchvision.models, name)
    net = factory(weights="IMAGENET1K_V1").to(device)
    net.eval()
    mean_t = torch.tensor(mean, device=device).view(3, 1, 1)
    std_t = torch.tensor(std, device=device).view(3, 1, 1)

    def fn(pixels: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float32)).to(device)
            x = (x - mean_t) / std_t
            out = net(x.unsqueeze(0))
        return out.squeeze(0).cpu().numpy()

    return Backend(name, shape, 1000, fn)


def load_backend(model: str, device: str = "cpu") -> Backend:
    """Resolve "builtin:PATH" or a torchvision model name to a Backend."""
    if model.startswith("builtin:"):
        return _builtin_backend(model.partition(":")[2])
    if model in TORCHVISION_MODELS:
        return _torch_backend(model, device)
    raise ValueError(
        f"unknown model {model!r}; use builtin:PATH or one of "
        f"{sorted(TORCHVISION_MODELS)}"
    )
