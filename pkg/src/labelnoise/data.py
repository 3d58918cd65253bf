"""Labeled image datasets: synthetic generation, normalization, splits, file format.

The on-disk format (``.nlds``) is, little-endian throughout::

    b"NLDS" u32 version=1 u32 n u32 H u32 W u32 C u32 n_classes
    u8 label_quality (0 clean, 1 noisy)
    n*H*W*C f64 pixels (row-major, channels last)
    n u8 labels
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

MAGIC = b"NLDS"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIIB")
QUALITIES = ("clean", "noisy")


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    images: np.ndarray
    labels: np.ndarray
    n_classes: int
    label_quality: str = "clean"
    name: str = ""

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be (n, H, W, C), got shape {self.images.shape}")
        if len(self.images) < 1:
            raise ValueError("dataset must hold at least one sample")
        if self.labels.shape != (len(self.images),):
            raise ValueError(f"{self.labels.shape} labels for {len(self.images)} images")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        if self.label_quality not in QUALITIES:
            raise ValueError(f"label_quality must be one of {QUALITIES}")

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.label_quality == other.label_quality
            and np.array_equal(self.labels, other.labels)
            and self.images.shape == other.images.shape
            and self.images.tobytes() == other.images.tobytes()
        )

    @property
    def image_shape(self) -> tuple:
        return self.images.shape[1:]

    def subset(self, idx) -> "LabeledDataset":
        return replace(self, images=self.images[idx], labels=self.labels[idx])

    def with_labels(self, labels, quality: str = "noisy") -> "LabeledDataset":
        return replace(self, labels=np.asarray(labels, dtype=np.int64), label_quality=quality)

    def histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 3
    samples_per_class: int = 500
    image_shape: tuple = (16, 16, 1)
    template_contrast: float = 1.0
    pixel_noise_sigma: float = 0.25

    def __post_init__(self):
        h, w, c = self.image_shape
        if h % 4 or w % 4 or min(h, w, c) < 1:
            raise ValueError(f"image H and W must be positive multiples of 4, got {h}x{w}")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if not 0.0 < self.template_contrast <= 1.0:
            raise ValueError("template_contrast must lie in (0, 1]")
        if self.pixel_noise_sigma < 0:
            raise ValueError("pixel_noise_sigma must be non-negative")


@dataclass(frozen=True)
class SplitPair:
    train: LabeledDataset
    val: LabeledDataset
    seed: int
    fraction: float
    train_index: np.ndarray
    val_index: np.ndarray


def class_template(k: int, image_shape) -> np.ndarray:
    """Binary motif for class ``k``: stripes, quadrants or checkers.

    Motifs cycle through eight families. Every eight classes the stripe period
    grows and the quadrant split moves off-centre, which keeps the templates
    distinct for up to 24 classes at 16x16 (more at larger sizes).
    """
    h, w, c = image_shape
    yy, xx = np.mgrid[0:h, 0:w]
    period = 2 * (1 + k // 8)  # stripe width in pixels
    family = k % 8
    cycle = k // 8
    # split at h/2, 2h/3, 3h/4, ... for successive cycles
    top = yy < h * (cycle + 1) // (cycle + 2)
    left = xx < w * (cycle + 1) // (cycle + 2)
    if family == 0:
        pat = (yy // period) % 2 == 0
    elif family == 1:
        pat = (xx // period) % 2 == 0
    elif family == 2:
        pat = top == left
    elif family == 3:
        pat = ((yy + xx) // period) % 2 == 0
    elif family == 4:
        pat = top
    elif family == 5:
        pat = left
    elif family == 6:
        pat = ((yy // period) + (xx // period)) % 2 == 0
    else:
        pat = ((yy - xx) // period) % 2 == 0
    return np.repeat(pat.astype(np.float64)[:, :, None], c, axis=2)


def templates(spec: SyntheticSpec) -> np.ndarray:
    temps = np.stack([spec.template_contrast * class_template(k, spec.image_shape)
                      for k in range(spec.n_classes)])
    flat = temps.reshape(spec.n_classes, -1)
    seen = {}
    for k, row in enumerate(flat):
        j = seen.setdefault(row.tobytes(), k)
        if j != k:
            raise ValueError(f"classes {j} and {k} share a template at {spec.image_shape}; "
                             "use a larger image or fewer classes")
    return temps


def generate_synthetic(spec: SyntheticSpec, seed: int = 0, name: str = "synthetic") -> LabeledDataset:
    """Clean, class-balanced images: class template plus Gaussian pixel noise, clamped to [0, 1].

    Samples are ordered by class.
    """
    rng = np.random.default_rng(seed)
    temps = templates(spec)
    labels = np.repeat(np.arange(spec.n_classes), spec.samples_per_class)
    noise = rng.normal(0.0, 1.0, size=(labels.size, *spec.image_shape)) * spec.pixel_noise_sigma
    images = np.clip(temps[labels] + noise, 0.0, 1.0)
    return LabeledDataset(images, labels, spec.n_classes, "clean", name)


def nearest_template_predict(images, spec: SyntheticSpec) -> np.ndarray:
    """Bayes-optimal classifier for the unclamped generator (equal priors, isotropic noise)."""
    temps = templates(spec).reshape(spec.n_classes, -1)
    flat = np.asarray(images).reshape(len(images), -1)
    d2 = (flat**2).sum(1)[:, None] - 2 * flat @ temps.T + (temps**2).sum(1)[None, :]
    return d2.argmin(axis=1)


def to_raw(images) -> np.ndarray:
    """Quantize [0, 1] images to 8-bit pixel values."""
    return np.round(np.asarray(images) * 255.0).astype(np.uint8)


def normalize(raw) -> np.ndarray:
    """Scale pixel values in [0, 255] to [0, 1].

    Only the range is checked, so data already in [0, 1] passes through and is
    shrunk again; the caller must not apply this twice.
    """
    raw = np.asarray(raw)
    if raw.size and (raw.min() < 0 or raw.max() > 255):
        raise ValueError(f"pixel values must lie in [0, 255], got [{raw.min()}, {raw.max()}]")
    return raw.astype(np.float64) / 255.0


def split(dataset: LabeledDataset, fraction: float = 0.8, seed: int = 0) -> SplitPair:
    """Random train/validation partition; the first ``floor(fraction * n)`` of a
    seeded permutation go to train."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    n_train = math.floor(fraction * n)
    if n_train == 0 or n_train == n:
        raise ValueError(f"a {fraction} split of {n} samples leaves one side empty")
    perm = np.random.default_rng(seed).permutation(n)
    tr, va = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    return SplitPair(dataset.subset(tr), dataset.subset(va), seed, fraction, tr, va)


# --- file format ------------------------------------------------------------

def dumps(dataset: LabeledDataset) -> bytes:
    if dataset.n_classes > 256:
        raise DatasetFormatError("the file format stores labels as bytes (at most 256 classes)")
    n = len(dataset)
    h, w, c = dataset.image_shape
    header = _HEADER.pack(MAGIC, VERSION, n, h, w, c, dataset.n_classes,
                          QUALITIES.index(dataset.label_quality))
    pixels = np.ascontiguousarray(dataset.images, dtype="<f8").tobytes()
    return header + pixels + dataset.labels.astype(np.uint8).tobytes()


def loads(data: bytes, name: str = "") -> LabeledDataset:
    if len(data) < 4 or data[:4] != MAGIC:
        raise DatasetFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < _HEADER.size:
        raise DatasetFormatError("file is truncated inside the header")
    _, version, n, h, w, c, n_classes, quality = _HEADER.unpack_from(data)
    if version != VERSION:
        raise DatasetFormatError(f"version mismatch: file has {version}, reader supports {VERSION}")
    if quality > 1:
        raise DatasetFormatError(f"unknown label_quality code {quality}")
    n_pix = n * h * w * c
    expected = _HEADER.size + 8 * n_pix + n
    if len(data) < expected:
        raise DatasetFormatError(f"file is truncated: {len(data)} bytes, expected {expected}")
    if len(data) > expected:
        raise DatasetFormatError(f"{len(data) - expected} unexpected trailing bytes")
    images = np.frombuffer(data, dtype="<f8", count=n_pix, offset=_HEADER.size)
    labels = np.frombuffer(data, dtype=np.uint8, count=n, offset=_HEADER.size + 8 * n_pix)
    if n and labels.max() >= n_classes:
        raise DatasetFormatError(f"label {labels.max()} out of range for {n_classes} classes")
    return LabeledDataset(images.reshape(n, h, w, c).astype(np.float64),
                          labels.astype(np.int64), n_classes, QUALITIES[quality], name)


def save(dataset: LabeledDataset, path) -> None:
    Path(path).write_bytes(dumps(dataset))


def load(path) -> LabeledDataset:
    path = Path(path)
    return loads(path.read_bytes(), name=path.stem)
