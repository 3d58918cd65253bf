"""
Corrupting labels with a transition matrix
==========================================

A transition matrix ``T`` says how often a sample of true class ``i`` ends
up labelled ``j``. Here we corrupt a clean synthetic dataset with the
``fashion05`` matrix and check that the observed flips match ``T``.
"""

import numpy as np

from labelnoise import data, noise_model

###############################################################################
# The matrix keeps each label with probability 0.5 and spreads the rest
# unevenly over the other two classes.
T = noise_model.known_matrix("fashion05")
print(T.entries)
print("flip rates:", noise_model.flip_rates(T))

###############################################################################
# A clean, balanced dataset of three synthetic classes.
spec = data.SyntheticSpec(n_classes=3, samples_per_class=5000)
clean = data.generate_synthetic(spec, seed=0)
print("clean histogram:", clean.histogram())

###############################################################################
# Injection is deterministic for a given seed. The record keeps the
# empirical matrix, which should sit within about 0.02 of ``T``.
noisy_labels, record = noise_model.inject_noise(clean.labels, T, seed=42)
print("flipped", record.n_flipped, "of", len(clean))
print(np.round(record.empirical_matrix, 3))
print("largest deviation:", np.abs(record.empirical_matrix - T.entries).max())

###############################################################################
# Because ``T`` is doubly stochastic the noisy labels stay balanced, so the
# histogram alone gives no hint that half of them are wrong.
noisy = clean.with_labels(noisy_labels)
print("noisy histogram:", noisy.histogram())
print("agreement with truth:", np.mean(noisy.labels == clean.labels))
