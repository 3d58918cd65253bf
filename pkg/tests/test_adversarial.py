import numpy as np
import pytest
from gradcheck import central_difference, rel_error

from labelnoise.losses import LossSpec
from labelnoise.nn import build, fgsm_example
from labelnoise.nn.adversarial import input_gradient
from labelnoise.nn.model import linear_softmax

CE = LossSpec()


def test_eps_zero_is_identity(rng):
    model = build("small_cnn", (4, 4, 1), 3, seed=0)
    x = rng.random((4, 4, 1))
    np.testing.assert_array_equal(fgsm_example(model, x, 1, CE, 0.0), x)


def test_perturbation_bound_and_sign(rng):
    model = build("small_cnn", (4, 4, 1), 3, seed=1)
    x = rng.random((50, 4, 4, 1))
    y = rng.integers(0, 3, 50)
    eps = 0.05
    adv = fgsm_example(model, x, y, CE, eps)
    assert np.abs(adv - x).max() <= eps
    assert adv.min() >= 0 and adv.max() <= 1
    grad = input_gradient(model, x, y, CE)
    inside = (x + eps * np.sign(grad) >= 0) & (x + eps * np.sign(grad) <= 1)
    # unclamped pixels move by eps in the gradient's sign, up to one ulp of rounding
    np.testing.assert_allclose((adv - x)[inside], (eps * np.sign(grad))[inside], rtol=0, atol=1e-15)


def test_input_gradient_per_row(rng):
    model = linear_softmax((2, 2, 1), 3, seed=2)
    x = rng.random((3, 2, 2, 1))
    y = np.array([0, 2, 1])
    grad = input_gradient(model, x, y, CE)
    for i in range(3):
        row = x[i:i + 1].copy()
        num = central_difference(lambda: CE(model.predict_proba(row), y[i:i + 1]).value, row)
        assert rel_error(grad[i:i + 1], num) < 1e-6


def test_linear_model_adversarial_loss_not_smaller(rng):
    model = linear_softmax((3, 3, 1), 4, seed=0)
    x = rng.random((200, 3, 3, 1))
    y = rng.integers(0, 4, 200)
    adv = fgsm_example(model, x, y, CE, 0.1)
    clean = CE(model.predict_proba(x), y).per_sample
    attacked = CE(model.predict_proba(adv), y).per_sample
    assert np.all(attacked >= clean)


def test_negative_eps_rejected(rng):
    model = linear_softmax((2, 2, 1), 2)
    with pytest.raises(ValueError):
        fgsm_example(model, rng.random((2, 2, 1)), 0, CE, -0.1)
