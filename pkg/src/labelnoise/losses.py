"""Classification losses and their label-noise corrections.

Every loss takes softmax probabilities and returns a :class:`LossResult` whose
gradient is taken with respect to the pre-softmax logits. Clipping is part of
the loss: a probability below ``PROB_FLOOR`` contributes a constant, so its
gradient term is zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .noise_model import TransitionMatrix

PROB_FLOOR = 1e-12
DEFAULT_EPSILON = 1e-7
DEFAULT_MIX_LAMBDA = 0.2
DEFAULT_COND_THRESHOLD = 1e4
LOSS_KINDS = ("cross_entropy", "nll", "reweighted", "backward")


class SingularMatrixError(ArithmeticError):
    pass


@dataclass
class LossResult:
    value: float
    grad_logits: np.ndarray
    weights: np.ndarray | None = None
    per_sample: np.ndarray | None = None


def _check(probs, labels):
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2:
        raise ValueError(f"expected a (batch, C) array, got shape {probs.shape}")
    if labels.shape != (probs.shape[0],):
        raise ValueError(f"{labels.shape[0] if labels.ndim else 0} labels for {probs.shape[0]} rows")
    c = probs.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"label out of range for {c} classes")
    return probs, labels.astype(np.intp)


def _one_hot(labels, c):
    out = np.zeros((labels.size, c))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _weighted_ce(probs, labels, weights):
    """Mean of ``weights * -log(clip(p[label]))`` and its logit gradient."""
    n, c = probs.shape
    rows = np.arange(n)
    p_true = probs[rows, labels]
    live = p_true > PROB_FLOOR
    per_sample = weights * -np.log(np.maximum(p_true, PROB_FLOOR))
    # d/dz of -log p_y is p - e_y; a clipped p_y makes the term constant
    grad = (probs - _one_hot(labels, c)) * (weights * live)[:, None] / n
    return per_sample, grad


def cross_entropy(probs, labels) -> LossResult:
    probs, labels = _check(probs, labels)
    per_sample, grad = _weighted_ce(probs, labels, np.ones(labels.size))
    return LossResult(float(per_sample.mean()), grad, per_sample=per_sample)


def nll(log_probs, labels) -> LossResult:
    """Negative log-likelihood on log-probabilities.

    Same value as :func:`cross_entropy` on ``exp(log_probs)``; the gradient
    assumes ``log_probs`` came from a log-softmax of the logits.
    """
    log_probs, labels = _check(log_probs, labels)
    floor = np.log(PROB_FLOOR)
    picked = log_probs[np.arange(labels.size), labels]
    per_sample = -np.maximum(picked, floor)
    live = picked > floor
    n, c = log_probs.shape
    grad = (np.exp(log_probs) - _one_hot(labels, c)) * live[:, None] / n
    return LossResult(float(per_sample.mean()), grad, per_sample=per_sample)


def beta_weight(probs, noisy_labels, T: TransitionMatrix, epsilon: float = DEFAULT_EPSILON):
    """Importance weights ``p(y|x) / (p_noisy(y|x) + epsilon)`` at the noisy label.

    The noisy posterior is the clean posterior pushed through the noise
    process, ``p_noisy = p @ T``.
    """
    if T is None:
        raise ValueError("importance reweighting needs a transition matrix")
    probs, noisy_labels = _check(probs, noisy_labels)
    if probs.shape[1] != T.n_classes:
        raise ValueError(f"{probs.shape[1]} probability columns for a {T.n_classes}-class matrix")
    rows = np.arange(noisy_labels.size)
    clean = probs[rows, noisy_labels]
    noisy = (probs @ T.entries)[rows, noisy_labels]
    return clean / (noisy + epsilon)


def reweighted_ce(probs, noisy_labels, T: TransitionMatrix,
                  epsilon: float = DEFAULT_EPSILON) -> LossResult:
    """Cross-entropy scaled per sample by :func:`beta_weight`.

    The weights are treated as constants in the gradient.
    """
    beta = beta_weight(probs, noisy_labels, T, epsilon)
    probs, noisy_labels = _check(probs, noisy_labels)
    per_sample, grad = _weighted_ce(probs, noisy_labels, beta)
    return LossResult(float(per_sample.mean()), grad, weights=beta, per_sample=per_sample)


# --- inversion ------------------------------------------------------------

def gauss_jordan_inverse(a, pivot_tol: float = 1e-14) -> np.ndarray:
    """Invert a small dense matrix by Gauss-Jordan elimination with partial pivoting."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    aug = np.hstack([a, np.eye(n)])
    scale = max(np.abs(a).max(), 1.0)
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[pivot, col]) <= pivot_tol * scale:
            raise SingularMatrixError(f"matrix is singular (no pivot in column {col})")
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] /= aug[col, col]
        others = np.arange(n) != col
        aug[others] -= np.outer(aug[others, col], aug[col])
    return aug[:, n:]


def condition_number(a) -> float:
    """1-norm condition number, ``inf`` for a singular matrix."""
    a = np.asarray(a, dtype=np.float64)
    try:
        inv = gauss_jordan_inverse(a)
    except SingularMatrixError:
        return float("inf")
    return float(np.abs(a).sum(axis=0).max() * np.abs(inv).sum(axis=0).max())


class StabilizedInverse(NamedTuple):
    inverse: np.ndarray
    matrix_used: np.ndarray
    mixed: bool
    condition_number: float


def stabilized_inverse(T: TransitionMatrix, mix_lambda: float = DEFAULT_MIX_LAMBDA,
                       cond_threshold: float = DEFAULT_COND_THRESHOLD) -> StabilizedInverse:
    """Invert ``T``, first blending in the identity when ``T`` is ill-conditioned.

    Above ``cond_threshold`` the matrix inverted is
    ``(1 - mix_lambda) * T + mix_lambda * I``, which is still row-stochastic.
    """
    if not 0.0 <= mix_lambda < 1.0:
        raise ValueError(f"mix_lambda must lie in [0, 1), got {mix_lambda}")
    t = np.asarray(T.entries)
    cond = condition_number(t)
    mixed = not cond <= cond_threshold
    used = (1.0 - mix_lambda) * t + mix_lambda * np.eye(T.n_classes) if mixed else t
    try:
        inv = gauss_jordan_inverse(used)
    except SingularMatrixError:
        raise SingularMatrixError(
            f"transition matrix is singular even after identity mixing (lambda={mix_lambda})"
        ) from None
    residual = np.abs(inv @ used - np.eye(T.n_classes)).max()
    if residual >= 1e-9:
        raise SingularMatrixError(f"inverse residual {residual:.3g} too large; matrix too ill-conditioned")
    return StabilizedInverse(inv, used, mixed, cond)


def backward_corrected(probs, noisy_labels, T: TransitionMatrix,
                       mix_lambda: float = DEFAULT_MIX_LAMBDA,
                       cond_threshold: float = DEFAULT_COND_THRESHOLD,
                       inverse: np.ndarray | None = None) -> LossResult:
    """Backward loss correction: the per-class loss vector is mapped through ``T^-1``.

    With ``l_k = -log p_k`` the sample loss is ``(T^-1 l)[noisy label]``. It
    can be negative for individual samples. Pass a precomputed ``inverse`` to
    skip the inversion.
    """
    if T is None and inverse is None:
        raise ValueError("backward correction needs a transition matrix")
    probs, noisy_labels = _check(probs, noisy_labels)
    if inverse is None:
        inverse = stabilized_inverse(T, mix_lambda, cond_threshold).inverse
    n = probs.shape[0]
    coeffs = inverse[noisy_labels]
    live = probs > PROB_FLOOR
    per_class = -np.log(np.maximum(probs, PROB_FLOOR))
    per_sample = (coeffs * per_class).sum(axis=1)
    # d/dz_j of -sum_k c_k log p_k = -c_j + p_j sum_k c_k (over unclipped k)
    cm = coeffs * live
    grad = (-cm + probs * cm.sum(axis=1, keepdims=True)) / n
    return LossResult(float(per_sample.mean()), grad, per_sample=per_sample)


@dataclass(frozen=True)
class LossSpec:
    """Selects and parametrizes a loss; calling it evaluates the loss."""

    kind: str = "cross_entropy"
    T: TransitionMatrix | None = None
    epsilon: float = DEFAULT_EPSILON
    mix_lambda: float = DEFAULT_MIX_LAMBDA
    cond_threshold: float = DEFAULT_COND_THRESHOLD

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind in ("reweighted", "backward") and self.T is None:
            raise ValueError(f"{self.kind} loss requires a transition matrix")
        if not 0.0 <= self.mix_lambda < 1.0:
            raise ValueError("mix_lambda must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.kind == "backward":
            inv = stabilized_inverse(self.T, self.mix_lambda, self.cond_threshold)
            object.__setattr__(self, "_inverse", inv)

    @property
    def inverse(self) -> StabilizedInverse | None:
        return getattr(self, "_inverse", None)

    def __call__(self, probs, labels) -> LossResult:
        if self.kind == "cross_entropy":
            return cross_entropy(probs, labels)
        if self.kind == "nll":
            return nll(np.log(np.maximum(probs, PROB_FLOOR)), labels)
        if self.kind == "reweighted":
            return reweighted_ce(probs, labels, self.T, self.epsilon)
        return backward_corrected(probs, labels, self.T, inverse=self.inverse.inverse)
