"""Class-conditional label noise: transition matrices and noise injection.

Convention used throughout the package: ``T[i, j] = P(noisy = j | true = i)``,
so every row of a transition matrix is a probability distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-6

KNOWN_MATRICES = {
    "fashion05": [[0.5, 0.2, 0.3], [0.3, 0.5, 0.2], [0.2, 0.3, 0.5]],
    "fashion06": [[0.4, 0.3, 0.3], [0.3, 0.4, 0.3], [0.3, 0.3, 0.4]],
}


class TransitionMatrixError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic ``C x C`` matrix of label flip probabilities.

    Construct through :func:`from_rows` (or the other constructors in this
    module); the entries array is read-only.
    """

    entries: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __repr__(self):
        rows = np.array2string(self.entries, precision=4, separator=", ")
        return f"TransitionMatrix({rows})"

    def is_identity(self) -> bool:
        return np.array_equal(self.entries, np.eye(self.n_classes))

    def to_csv(self, path) -> None:
        Path(path).write_text(format_csv(self))

    @classmethod
    def from_csv(cls, path) -> "TransitionMatrix":
        return parse_csv(Path(path).read_text())


def from_rows(rows) -> TransitionMatrix:
    """Validate a square probability matrix and return it as a TransitionMatrix.

    Rows whose sum is within 1e-6 of one are renormalized; anything further
    off, or any negative entry, is rejected.
    """
    try:
        arr = np.array(rows, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise TransitionMatrixError(f"not a numeric matrix: {exc}") from None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise TransitionMatrixError(f"transition matrix must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise TransitionMatrixError("transition matrix needs at least 2 classes")
    if not np.all(np.isfinite(arr)):
        raise TransitionMatrixError("transition matrix has non-finite entries")
    if np.any(arr < 0):
        i, j = np.argwhere(arr < 0)[0]
        raise TransitionMatrixError(f"negative entry {arr[i, j]} at ({i}, {j})")
    if np.any(arr > 1):
        i, j = np.argwhere(arr > 1)[0]
        raise TransitionMatrixError(f"entry {arr[i, j]} at ({i}, {j}) exceeds 1")
    sums = arr.sum(axis=1)
    bad = np.abs(sums - 1.0) > ROW_SUM_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise TransitionMatrixError(f"row {i} sums to {sums[i]!r}, not 1")
    arr = arr / sums[:, None]
    arr.setflags(write=False)
    return TransitionMatrix(arr)


def identity(n_classes: int) -> TransitionMatrix:
    return from_rows(np.eye(n_classes))


def known_matrix(name: str) -> TransitionMatrix:
    """Named ground-truth matrices: ``fashion05`` (flip rate 0.5) and ``fashion06`` (0.6)."""
    try:
        return from_rows(KNOWN_MATRICES[name])
    except KeyError:
        raise TransitionMatrixError(
            f"no ground-truth transition matrix named {name!r}; "
            f"known: {sorted(KNOWN_MATRICES)}"
        ) from None


def symmetric(n_classes: int, rho: float) -> TransitionMatrix:
    """Uniform flipping: keep with prob ``1 - rho``, else pick another class uniformly."""
    if not 0.0 <= rho < 1.0:
        raise TransitionMatrixError(f"rho must lie in [0, 1), got {rho}")
    if n_classes < 2:
        raise TransitionMatrixError("n_classes must be >= 2")
    arr = np.full((n_classes, n_classes), rho / (n_classes - 1))
    np.fill_diagonal(arr, 1.0 - rho)
    return from_rows(arr)


def resolve(source: str, n_classes: int | None = None) -> TransitionMatrix:
    """Turn a textual source into a matrix.

    Accepts a known name, ``identity``, ``symmetric:<rho>`` or a CSV path.
    """
    if source in KNOWN_MATRICES:
        return known_matrix(source)
    if source == "identity":
        return identity(n_classes or 3)
    if source.startswith("symmetric:"):
        return symmetric(n_classes or 3, float(source.split(":", 1)[1]))
    path = Path(source.split(":", 1)[1] if source.startswith("file:") else source)
    if path.exists():
        return TransitionMatrix.from_csv(path)
    raise TransitionMatrixError(f"cannot resolve transition matrix source {source!r}")


def flip_rates(T: TransitionMatrix) -> np.ndarray:
    """Per-class probability of leaving the true class, ``1 - T[i, i]``.

    For two classes this is the pair (rho_{+1}, rho_{-1}) of the binary model,
    with class 0 playing the role of the positive class.
    """
    return 1.0 - np.diag(T.entries)


def format_csv(T: TransitionMatrix) -> str:
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in T.entries)


def parse_csv(text: str) -> TransitionMatrix:
    rows = [
        [float(v) for v in line.split(",")]
        for line in text.splitlines()
        if line.strip()
    ]
    if len({len(r) for r in rows}) > 1:
        raise TransitionMatrixError("ragged rows in transition matrix CSV")
    return from_rows(rows)


# --- sampling -------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix_uniform(seed: int, n: int) -> np.ndarray:
    """``n`` uniforms in [0, 1) from the splitmix64 stream started at ``seed``.

    Pure integer arithmetic, so the stream is identical on every platform.
    """
    with np.errstate(over="ignore"):
        state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN * np.arange(
            1, n + 1, dtype=np.uint64
        )
        z = state
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass
class NoiseInjectionRecord:
    seed: int
    n_flipped: int
    empirical_matrix: np.ndarray = field(repr=False)
    class_counts: np.ndarray = field(repr=False)


def empirical_transition(true_labels, noisy_labels, n_classes: int) -> np.ndarray:
    """Observed flip frequencies; rows of absent classes are left at zero."""
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (np.asarray(true_labels), np.asarray(noisy_labels)), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def inject_noise(labels, T: TransitionMatrix, seed: int):
    """Resample every label from its row of ``T``.

    Returns ``(noisy_labels, record)``. Each label consumes one uniform from
    the seeded stream and is mapped through the inverse CDF of its row.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if labels.size and (labels.min() < 0 or labels.max() >= T.n_classes):
        bad = labels[(labels < 0) | (labels >= T.n_classes)][0]
        raise ValueError(f"label {bad} out of range for {T.n_classes} classes")
    labels = labels.astype(np.int64)
    u = splitmix_uniform(seed, labels.size)
    cdf = np.cumsum(T.entries, axis=1)
    noisy = (u[:, None] >= cdf[labels]).sum(axis=1)
    # guards against a cdf that ends a hair below 1
    noisy = np.minimum(noisy, T.n_classes - 1)
    record = NoiseInjectionRecord(
        seed=seed,
        n_flipped=int(np.count_nonzero(noisy != labels)),
        empirical_matrix=empirical_transition(labels, noisy, T.n_classes),
        class_counts=np.bincount(labels, minlength=T.n_classes),
    )
    return noisy, record
