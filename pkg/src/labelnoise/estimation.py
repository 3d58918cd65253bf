"""Transition-matrix estimation from a probabilistic classifier.

For each observed noisy label ``j`` the classifier's class probabilities are
averaged over the samples carrying that label::

    M[i, j] = mean_{x : noisy(x) = j} P_model(class = i | x)

``M[i, j]`` estimates ``P(true = i | noisy = j)``. When class priors are
uniform and the noise process is doubly stochastic (``fashion05`` and
``fashion06`` both are), Bayes' rule makes this equal to
``P(noisy = j | true = i)``, the forward matrix. ``M`` is therefore used in
place, rows renormalized, with no transpose; see the README for the
orientation argument.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import noise_model
from .losses import condition_number
from .noise_model import TransitionMatrix

ESTIMATION_BATCH = 256


class EstimationError(ValueError):
    pass


@dataclass
class EstimationReport:
    estimated: TransitionMatrix
    per_class_counts: np.ndarray
    condition_number: float
    mse_vs_truth: float | None = None
    column_averages: np.ndarray | None = None

    def summary(self) -> str:
        mse = "n/a" if self.mse_vs_truth is None else repr(self.mse_vs_truth)
        counts = " ".join(str(int(c)) for c in self.per_class_counts)
        return f"mse={mse} condition_number={self.condition_number:.6g} counts={counts}"

    def to_csv(self) -> str:
        return noise_model.format_csv(self.estimated)


def mse(T_true, T_est) -> float:
    """Mean squared difference over all C*C entries."""
    a = np.asarray(T_true, dtype=np.float64)
    b = np.asarray(T_est, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def estimate_transition(model, images, noisy_labels, n_classes: int | None = None,
                        truth: TransitionMatrix | None = None,
                        batch_size: int = ESTIMATION_BATCH) -> EstimationReport:
    """Average predicted class probabilities per observed noisy label.

    ``model`` only needs a ``predict_proba(batch)`` method returning rows of
    class probabilities; it is called in inference mode, batch by batch in
    index order.
    """
    images = np.asarray(images)
    noisy_labels = np.asarray(noisy_labels)
    if len(images) != len(noisy_labels):
        raise EstimationError(f"{len(images)} images but {len(noisy_labels)} labels")
    chunks = [model.predict_proba(images[i:i + batch_size])
              for i in range(0, len(images), batch_size)]
    probs = np.concatenate(chunks)
    c = probs.shape[1]
    if n_classes is not None and n_classes != c:
        raise EstimationError(f"model emits {c} classes, expected {n_classes}")
    if noisy_labels.min() < 0 or noisy_labels.max() >= c:
        raise EstimationError(f"noisy labels outside [0, {c})")

    counts = np.bincount(noisy_labels, minlength=c)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise EstimationError(f"no samples carry noisy label {int(missing[0])}; cannot estimate its column")

    m = np.zeros((c, c))
    for j in range(c):
        m[:, j] = probs[noisy_labels == j].mean(axis=0)
    sums = m.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise EstimationError(f"model never assigns probability to class {int(np.argmin(sums))}")
    rows = m / sums
    estimated = noise_model.from_rows(rows)
    return EstimationReport(
        estimated=estimated,
        per_class_counts=counts,
        condition_number=condition_number(estimated.entries),
        mse_vs_truth=None if truth is None else mse(truth, estimated),
        column_averages=m,
    )
