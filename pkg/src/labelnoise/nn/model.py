from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .layers import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2x2,
    ReLU,
    Softmax,
    softmax,
)

ARCHITECTURES = {
    # conv filter counts, hidden units, pooling after each conv
    "small_cnn": ((16, 32, 64), 64, (True, True, False)),
    "enhanced_cnn": ((32, 64, 128, 128), 200, (True, True, True, False)),
}

DEFAULT_DROPOUT = 0.3

_model_ids = itertools.count()


class StaleCacheError(RuntimeError):
    pass


@dataclass
class ForwardCache:
    model_id: int
    version: int
    layer_caches: list
    logits: np.ndarray


class Model:
    """An ordered stack of layers ending in a softmax over ``n_classes``."""

    def __init__(self, layers: list[Layer], input_shape, n_classes: int,
                 architecture_name: str = "custom"):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.n_classes = int(n_classes)
        self.architecture_name = architecture_name
        if not self.layers or not isinstance(self.layers[-1], Softmax):
            raise ValueError("final layer must be a softmax")
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        if shape != (self.n_classes,):
            raise ValueError(f"network emits shape {shape}, expected ({self.n_classes},)")
        self._id = next(_model_ids)
        self._version = 0

    def __repr__(self):
        body = ", ".join(repr(l) for l in self.layers)
        return f"Model({self.architecture_name}, in={self.input_shape}, [{body}])"

    # -- parameters ---------------------------------------------------------

    def param_keys(self):
        return [(i, name) for i, layer in enumerate(self.layers) for name in layer.params]

    def parameters(self) -> list[np.ndarray]:
        """Live references to every parameter array, in a fixed order."""
        return [self.layers[i].params[name] for i, name in self.param_keys()]

    def get_weights(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def set_weights(self, weights) -> None:
        params = self.parameters()
        if len(weights) != len(params):
            raise ValueError("weight list does not match the model's parameters")
        for p, w in zip(params, weights):
            if p.shape != np.shape(w):
                raise ValueError(f"shape mismatch: {p.shape} vs {np.shape(w)}")
            p[...] = w
        self.mark_updated()

    def mark_updated(self):
        """Invalidate outstanding forward caches after a parameter change."""
        self._version += 1

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    # -- passes ---------------------------------------------------------------

    def _check_batch(self, batch):
        batch = np.asarray(batch, dtype=np.float64)
        if batch.shape[1:] != self.input_shape:
            raise ValueError(
                f"batch shape {batch.shape[1:]} does not match model input {self.input_shape}"
            )
        return batch

    def forward(self, batch, training: bool = False, seed: int | None = None):
        """Run the network; returns ``(probabilities, cache)``.

        ``seed`` drives the dropout masks and is only consulted in training mode.
        """
        x = self._check_batch(batch)
        rng = np.random.default_rng(seed) if training else None
        caches = []
        for layer in self.layers[:-1]:
            x, cache = layer.forward(x, training=training, rng=rng)
            caches.append(cache)
        logits = x
        return softmax(logits), ForwardCache(self._id, self._version, caches, logits)

    def backward(self, cache: ForwardCache, grad_logits, return_input_grad=False):
        """Backpropagate a gradient taken with respect to the logits."""
        if cache.model_id != self._id:
            raise StaleCacheError("cache was produced by a different model")
        if cache.version != self._version:
            raise StaleCacheError("parameters changed since this forward pass")
        grad = np.asarray(grad_logits, dtype=np.float64)
        if grad.shape != cache.logits.shape:
            raise ValueError(f"gradient shape {grad.shape} != logits shape {cache.logits.shape}")
        per_layer = [None] * (len(self.layers) - 1)
        for i in range(len(self.layers) - 2, -1, -1):
            grad, per_layer[i] = self.layers[i].backward(grad, cache.layer_caches[i])
        grads = [per_layer[i][name] for i, name in self.param_keys()]
        return (grads, grad) if return_input_grad else grads

    def predict_proba(self, batch, batch_size: int = 256) -> np.ndarray:
        x = self._check_batch(batch)
        out = [self.forward(x[i:i + batch_size])[0] for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.n_classes))

    def predict(self, batch, batch_size: int = 256) -> np.ndarray:
        return self.predict_proba(batch, batch_size).argmax(axis=1)


def build(architecture_name: str, input_shape, n_classes: int, seed: int = 0,
          filters=None, hidden: int | None = None, dropout: float = DEFAULT_DROPOUT) -> Model:
    """Build ``small_cnn`` or ``enhanced_cnn`` with seeded weights.

    ``filters`` and ``hidden`` override the architecture's conv widths and
    dense width, for hyper-parameter sweeps.
    """
    if architecture_name not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture_name!r}")
    default_filters, default_hidden, pools = ARCHITECTURES[architecture_name]
    filters = tuple(filters) if filters is not None else default_filters
    hidden = hidden if hidden is not None else default_hidden
    if len(filters) != len(default_filters):
        raise ValueError(
            f"{architecture_name} takes {len(default_filters)} filter counts, got {len(filters)}"
        )
    if len(input_shape) != 3:
        raise ValueError(f"input shape must be (H, W, C), got {input_shape}")
    h, w, c = (int(d) for d in input_shape)
    factor = 2 ** sum(pools)
    if h % factor or w % factor or h <= 0 or w <= 0:
        raise ValueError(
            f"{architecture_name} needs H and W divisible by {factor}, got {h}x{w}"
        )

    rng = np.random.default_rng(seed)
    layers: list[Layer] = []
    channels = c
    for f, pool in zip(filters, pools):
        layers += [Conv2D(channels, f, rng=rng), ReLU()]
        if pool:
            layers.append(MaxPool2x2())
        channels = f
    flat = (h // factor) * (w // factor) * channels
    layers += [
        Dropout(dropout),
        Flatten(),
        Dense(flat, hidden, rng=rng),
        ReLU(),
        Dense(hidden, n_classes, rng=rng),
        Softmax(),
    ]
    return Model(layers, (h, w, c), n_classes, architecture_name)


def linear_softmax(input_shape, n_classes: int, seed: int = 0) -> Model:
    """Flatten -> dense -> softmax; a convex model handy for probes and tests."""
    d = int(np.prod(input_shape))
    rng = np.random.default_rng(seed)
    return Model([Flatten(), Dense(d, n_classes, rng=rng), Softmax()],
                 input_shape, n_classes, "custom")
