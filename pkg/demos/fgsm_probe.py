"""
Fast gradient sign perturbations
================================

FGSM moves every pixel by ``eps`` in the direction that increases the loss,
``x_adv = clip(x + eps * sign(grad_x J), 0, 1)``. On a linear softmax model
this can never lower the cross-entropy.
"""

import numpy as np

from labelnoise import data
from labelnoise.losses import LossSpec
from labelnoise.nn import TrainConfig, build, fgsm_example, train
from labelnoise.nn.model import linear_softmax

ce = LossSpec()
rng = np.random.default_rng(0)

###############################################################################
# Linear model: every attacked loss is at least the clean one.
linear = linear_softmax((8, 8, 1), 3, seed=0)
x = rng.random((500, 8, 8, 1))
y = rng.integers(0, 3, 500)
adv = fgsm_example(linear, x, y, ce, eps=0.05)
print("max |x_adv - x|:", np.abs(adv - x).max())
clean_loss = ce(linear.predict_proba(x), y).per_sample
adv_loss = ce(linear.predict_proba(adv), y).per_sample
print("loss increased or unchanged:", np.mean(adv_loss >= clean_loss))

###############################################################################
# A small CNN on clean but harder synthetic data. Accuracy falls as eps grows.
spec = data.SyntheticSpec(3, 300, (16, 16, 1), template_contrast=0.5, pixel_noise_sigma=0.5)
ds = data.generate_synthetic(spec, seed=3)
parts = data.split(ds, 0.8, seed=3)
cnn = build("small_cnn", spec.image_shape, 3, seed=3)
cnn, _ = train(cnn, parts.train, parts.val, ce, TrainConfig(max_epochs=5, patience=2))
val = parts.val
for eps in (0.0, 0.02, 0.05, 0.1, 0.2):
    attacked = fgsm_example(cnn, val.images, val.labels, ce, eps)
    print(f"eps {eps:.2f}: accuracy {np.mean(cnn.predict(attacked) == val.labels):.3f}")
