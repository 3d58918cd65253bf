"""Binary model checkpoints.

Layout, all integers little-endian::

    b"NLMD"  u32 version
    u32 len + utf-8 architecture name
    u32 n_classes  u32 rank  rank x u32 input dims
    u32 n_layers, then per layer: u8 kind code + kind-specific fields
        conv2d: u32 in_channels, u32 filters
        dense:  u32 in_features, u32 out_features
        dropout: f64 rate
    parameter arrays as little-endian f64, layer order, then name order
    (kernel/weight before bias)
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2x2, ReLU, Softmax
from .model import Model

MAGIC = b"NLMD"
VERSION = 1
KIND_CODES = {"conv2d": 0, "maxpool2x2": 1, "relu": 2, "dropout": 3,
              "flatten": 4, "dense": 5, "softmax": 6}
_KINDS = {v: k for k, v in KIND_CODES.items()}


class CheckpointError(ValueError):
    pass


def dumps(model: Model) -> bytes:
    name = model.architecture_name.encode()
    out = [MAGIC, struct.pack("<II", VERSION, len(name)), name,
           struct.pack("<II", model.n_classes, len(model.input_shape)),
           struct.pack(f"<{len(model.input_shape)}I", *model.input_shape),
           struct.pack("<I", len(model.layers))]
    for layer in model.layers:
        out.append(struct.pack("<B", KIND_CODES[layer.kind]))
        if layer.kind == "conv2d":
            out.append(struct.pack("<II", layer.in_channels, layer.filters))
        elif layer.kind == "dense":
            out.append(struct.pack("<II", layer.in_features, layer.out_features))
        elif layer.kind == "dropout":
            out.append(struct.pack("<d", layer.rate))
    for p in model.parameters():
        out.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes) -> Model:
    r = _Reader(data)
    magic = r.take(4)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, name_len = r.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    name = r.take(name_len).decode()
    n_classes, rank = r.unpack("<II")
    input_shape = r.unpack(f"<{rank}I")
    (n_layers,) = r.unpack("<I")
    layers = []
    for _ in range(n_layers):
        (code,) = r.unpack("<B")
        kind = _KINDS.get(code)
        if kind == "conv2d":
            layers.append(Conv2D(*r.unpack("<II")))
        elif kind == "dense":
            layers.append(Dense(*r.unpack("<II")))
        elif kind == "dropout":
            layers.append(Dropout(*r.unpack("<d")))
        elif kind is None:
            raise CheckpointError(f"unknown layer code {code}")
        else:
            layers.append({"maxpool2x2": MaxPool2x2, "relu": ReLU, "flatten": Flatten,
                           "softmax": Softmax}[kind]())
    model = Model(layers, input_shape, n_classes, name)
    weights = []
    for p in model.parameters():
        weights.append(np.frombuffer(r.take(p.size * 8), dtype="<f8").reshape(p.shape))
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after parameters")
    model.set_weights(weights)
    return model


def save_model(model: Model, path) -> None:
    Path(path).write_bytes(dumps(model))


def load_model(path) -> Model:
    return loads(Path(path).read_bytes())
