"""Layers with hand-written forward and backward passes.

Activations are channels-last: images are ``(N, H, W, C)``, dense inputs
``(N, D)``. Each layer's ``forward`` returns ``(output, cache)`` and its
``backward`` takes ``(grad_output, cache)`` and returns
``(grad_input, param_grads)`` with ``param_grads`` keyed like ``params``.
"""
from __future__ import annotations

import numpy as np


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}

    def output_shape(self, input_shape: tuple) -> tuple:
        return input_shape

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad, cache):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


def _uniform_init(rng, shape, fan_in):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Conv2D(Layer):
    """3x3 convolution, stride 1, zero padding that keeps H and W."""

    kind = "conv2d"
    ksize = 3

    def __init__(self, in_channels: int, filters: int, rng=None):
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        fan_in = self.ksize * self.ksize * in_channels
        shape = (self.ksize, self.ksize, in_channels, filters)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "kernel": _uniform_init(rng, shape, fan_in),
            "bias": np.zeros(filters),
        }

    def output_shape(self, input_shape):
        h, w, c = input_shape
        if c != self.in_channels:
            raise ValueError(f"conv2d expects {self.in_channels} channels, got {c}")
        return (h, w, self.filters)

    def _columns(self, x):
        n, h, w, c = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        # column order is (dy, dx, channel), matching kernel.reshape(-1, filters)
        cols = np.concatenate(
            [xp[:, dy:dy + h, dx:dx + w, :] for dy in range(3) for dx in range(3)],
            axis=-1,
        )
        return cols.reshape(n * h * w, 9 * c)

    def forward(self, x, training=False, rng=None):
        n, h, w, _ = x.shape
        cols = self._columns(x)
        out = cols @ self.params["kernel"].reshape(-1, self.filters) + self.params["bias"]
        return out.reshape(n, h, w, self.filters), (x.shape, cols)

    def backward(self, grad, cache):
        shape, cols = cache
        n, h, w, c = shape
        g = grad.reshape(-1, self.filters)
        kernel = self.params["kernel"]
        grads = {
            "kernel": (cols.T @ g).reshape(kernel.shape),
            "bias": g.sum(axis=0),
        }
        dcols = (g @ kernel.reshape(-1, self.filters).T).reshape(n, h, w, 9, c)
        dxp = np.zeros((n, h + 2, w + 2, c))
        for k in range(9):
            dy, dx = divmod(k, 3)
            dxp[:, dy:dy + h, dx:dx + w, :] += dcols[:, :, :, k, :]
        return dxp[:, 1:-1, 1:-1, :], grads

    def __repr__(self):
        return f"Conv2D({self.in_channels}->{self.filters})"


class MaxPool2x2(Layer):
    kind = "maxpool2x2"

    def output_shape(self, input_shape):
        h, w, c = input_shape
        if h % 2 or w % 2:
            raise ValueError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
        return (h // 2, w // 2, c)

    def forward(self, x, training=False, rng=None):
        n, h, w, c = x.shape
        win = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4)
        win = win.reshape(n, h // 2, w // 2, c, 4)
        idx = win.argmax(axis=-1)
        out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        return out, (x.shape, idx)

    def backward(self, grad, cache):
        (n, h, w, c), idx = cache
        dwin = np.zeros((n, h // 2, w // 2, c, 4))
        # ties route the whole gradient to the first maximum
        np.put_along_axis(dwin, idx[..., None], grad[..., None], axis=-1)
        dx = dwin.reshape(n, h // 2, w // 2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        return dx.reshape(n, h, w, c), {}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False, rng=None):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad, cache):
        return grad * cache, {}


class Dropout(Layer):
    """Inverted dropout; a no-op outside training."""

    kind = "dropout"

    def __init__(self, rate: float = 0.3):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in training mode needs a random generator")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, grad, cache):
        return (grad if cache is None else grad * cache), {}

    def __repr__(self):
        return f"Dropout({self.rate})"


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, training=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), {}


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int, rng=None):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "weight": _uniform_init(rng, (in_features, out_features), in_features),
            "bias": np.zeros(out_features),
        }

    def output_shape(self, input_shape):
        if input_shape != (self.in_features,):
            raise ValueError(f"dense expects ({self.in_features},), got {input_shape}")
        return (self.out_features,)

    def forward(self, x, training=False, rng=None):
        return x @ self.params["weight"] + self.params["bias"], x

    def backward(self, grad, cache):
        x = cache
        grads = {"weight": x.T @ grad, "bias": grad.sum(axis=0)}
        return grad @ self.params["weight"].T, grads

    def __repr__(self):
        return f"Dense({self.in_features}->{self.out_features})"


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class Softmax(Layer):
    """Terminal normalization. Its Jacobian is folded into the losses, which
    return gradients with respect to the logits, so ``backward`` passes through."""

    kind = "softmax"

    def forward(self, x, training=False, rng=None):
        return softmax(x), None

    def backward(self, grad, cache):
        return grad, {}


LAYER_KINDS = {
    cls.kind: cls for cls in (Conv2D, MaxPool2x2, ReLU, Dropout, Flatten, Dense, Softmax)
}
