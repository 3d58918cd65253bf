"""
Estimating the noise matrix from a trained classifier
=====================================================

When ``T`` is unknown we can estimate it from a network trained directly on
the noisy labels. For every observed label ``j`` we average the predicted
class probabilities over the samples carrying ``j``. Column ``j`` of the
result approximates ``P(true = i | noisy = j)``. With balanced classes and a
doubly stochastic ``T`` this equals the forward matrix.

Training takes about a minute on one CPU.
"""

import numpy as np

from labelnoise import data, noise_model
from labelnoise.estimation import estimate_transition
from labelnoise.losses import LossSpec
from labelnoise.nn import TrainConfig, build, train

T = noise_model.known_matrix("fashion05")
spec = data.SyntheticSpec(3, 1500, (16, 16, 1), template_contrast=0.5, pixel_noise_sigma=0.5)
clean = data.generate_synthetic(spec, seed=1)
noisy_labels, _ = noise_model.inject_noise(clean.labels, T, seed=1)
parts = data.split(clean.with_labels(noisy_labels), 0.8, seed=1)

###############################################################################
# Train a plain cross-entropy model on the noisy labels. Early stopping on
# the noisy validation loss stops it before it memorizes the flips.
model = build("small_cnn", spec.image_shape, 3, seed=1)
model, history = train(model, parts.train, parts.val, LossSpec(),
                       TrainConfig(max_epochs=10, patience=3, seed=1))
print("epochs:", len(history), "best:", history.best_epoch)

###############################################################################
# Estimate and compare.
report = estimate_transition(model, parts.train.images, parts.train.labels, truth=T)
print(np.round(report.estimated.entries, 3))
print(report.summary())

###############################################################################
# A well-calibrated model reports the *noisy* posterior ``p @ T`` rather than
# the clean one. With near one-hot clean posteriors the estimate then tends
# to ``T^T T``, which is smoother than ``T``. Its distance to ``T`` sets a
# floor on the error of this estimator.
smooth = T.entries.T @ T.entries
print("T^T T:\n", np.round(smooth, 3))
print("MSE(T, T^T T):", np.mean((smooth - T.entries) ** 2))
