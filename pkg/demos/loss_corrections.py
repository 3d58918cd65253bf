"""
Two ways to correct a loss for label noise
==========================================

Both corrections take the noise matrix ``T`` as given.

* Importance reweighting scales each sample's cross-entropy by
  ``beta = p(y|x) / p_noisy(y|x)``, the ratio of the clean posterior to the
  noisy one.
* Backward correction replaces the per-class loss vector ``l`` by
  ``T^-1 l`` before picking the entry of the observed label.
"""

import numpy as np

from labelnoise import losses, noise_model

T = noise_model.known_matrix("fashion05")
probs = np.array([[0.7, 0.2, 0.1]])

###############################################################################
# Reweighting
# -----------
# The noisy posterior is ``probs @ T``. For label 0 it is
# ``0.7*0.5 + 0.2*0.3 + 0.1*0.2 = 0.43``, so beta = 0.7 / 0.43.
beta = losses.beta_weight(probs, [0], T)
print("beta:", beta, "closed form:", 0.7 / 0.43)
res = losses.reweighted_ce(probs, [0], T)
print("reweighted loss:", res.value, "= beta * -ln 0.7 =", beta[0] * -np.log(0.7))

###############################################################################
# With an identity matrix there is no noise and beta is 1 up to the small
# stabilizer in its denominator.
print("identity beta:", losses.beta_weight(probs, [0], noise_model.identity(3)))

###############################################################################
# Backward correction
# -------------------
# ``fashion05`` is well conditioned, so it is inverted as is.
inv = losses.stabilized_inverse(T)
print("condition number:", inv.condition_number, "mixed:", inv.mixed)
print(np.round(inv.inverse, 4))

###############################################################################
# The corrected loss is unbiased. Averaging it over noisy labels drawn from
# row ``y`` of ``T`` gives back the clean loss of class ``y``.
ell = -np.log(probs[0])
corrected = inv.inverse @ ell
for y in range(3):
    print(f"class {y}: clean {ell[y]:.6f}  expected corrected {T.entries[y] @ corrected:.6f}")

###############################################################################
# Individual corrected losses can be negative. This happens when the model
# is confident in the observed label.
print("confident sample:", losses.backward_corrected([[0.01, 0.98, 0.01]], [1], T).value)

###############################################################################
# A singular matrix, such as one with all rows uniform, cannot be inverted.
# The stabilized inverse blends in the identity first: ``0.8 T + 0.2 I``.
flat = noise_model.from_rows(np.full((3, 3), 1 / 3))
res = losses.stabilized_inverse(flat)
print("uniform rows -> mixed:", res.mixed)
print(np.round(res.inverse, 4))
