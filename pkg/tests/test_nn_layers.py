"""Forward definitions and finite-difference checks for every layer kind."""
import numpy as np
import pytest
from gradcheck import central_difference, rel_error

from labelnoise.nn import layers as L

GRAD_TOL = 1e-6


def check_layer(layer, x, rng, training=False, seed=5):
    """Compare backward() with central differences of <forward(x), upstream>."""
    def run():
        out, _ = layer.forward(x, training=training, rng=np.random.default_rng(seed))
        return out

    out, cache = layer.forward(x, training=training, rng=np.random.default_rng(seed))
    upstream = rng.normal(size=out.shape)
    dx, grads = layer.backward(upstream, cache)

    def objective():
        return float(np.sum(run() * upstream))

    assert rel_error(dx, central_difference(objective, x)) < GRAD_TOL
    for name, p in layer.params.items():
        assert rel_error(grads[name], central_difference(objective, p)) < GRAD_TOL, name
    return dx, grads


def test_conv2d_gradients(rng):
    layer = L.Conv2D(2, 3, rng=rng)
    layer.params["bias"][:] = rng.normal(size=3)
    check_layer(layer, rng.normal(size=(2, 4, 6, 2)), rng)


def test_conv2d_matches_direct_convolution(rng):
    layer = L.Conv2D(2, 3, rng=rng)
    x = rng.normal(size=(1, 5, 4, 2))
    out, _ = layer.forward(x)
    k = layer.params["kernel"]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    direct = np.zeros((1, 5, 4, 3))
    for i in range(5):
        for j in range(4):
            patch = xp[0, i:i + 3, j:j + 3, :]
            direct[0, i, j] = np.tensordot(patch, k, axes=([0, 1, 2], [0, 1, 2]))
    np.testing.assert_allclose(out, direct, atol=1e-12)


def test_conv_init_range():
    layer = L.Conv2D(4, 8, rng=np.random.default_rng(0))
    limit = np.sqrt(6 / 36)
    assert np.abs(layer.params["kernel"]).max() <= limit
    assert not layer.params["bias"].any()


def test_maxpool_forward_example():
    out, _ = L.MaxPool2x2().forward(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1))
    assert out.shape == (1, 1, 1, 1) and out.item() == 4.0


def test_maxpool_gradients(rng):
    check_layer(L.MaxPool2x2(), rng.normal(size=(2, 4, 6, 3)), rng)


def test_maxpool_rejects_odd_dims():
    with pytest.raises(ValueError):
        L.MaxPool2x2().output_shape((5, 4, 1))


def test_relu_forward_example():
    out, _ = L.ReLU().forward(np.array([[-1.0, 0.0, 2.0]]))
    np.testing.assert_array_equal(out, [[0.0, 0.0, 2.0]])


def test_relu_gradients(rng):
    check_layer(L.ReLU(), rng.normal(size=(3, 7)), rng)


def test_dense_gradients(rng):
    layer = L.Dense(5, 4, rng=rng)
    layer.params["bias"][:] = rng.normal(size=4)
    check_layer(layer, rng.normal(size=(3, 5)), rng)


def test_dense_weight_gradient_single_example(rng):
    layer = L.Dense(3, 2, rng=rng)
    x = rng.normal(size=(1, 3))
    g = rng.normal(size=(1, 2))
    _, cache = layer.forward(x)
    _, grads = layer.backward(g, cache)
    # weights are stored (in, out), so dW = x^T g
    np.testing.assert_allclose(grads["weight"], np.outer(x[0], g[0]), atol=1e-15)


def test_flatten_gradients(rng):
    check_layer(L.Flatten(), rng.normal(size=(2, 2, 3, 2)), rng)


def test_dropout_training_gradients(rng):
    check_layer(L.Dropout(0.4), rng.normal(size=(4, 6)), rng, training=True)


def test_dropout_rate_zero_and_inference_are_identity(rng):
    x = rng.normal(size=(3, 8))
    out, _ = L.Dropout(0.0).forward(x, training=True, rng=rng)
    np.testing.assert_array_equal(out, x)
    out, _ = L.Dropout(0.5).forward(x, training=False)
    np.testing.assert_array_equal(out, x)


def test_dropout_preserves_expectation():
    x = np.ones((200, 500))
    out, _ = L.Dropout(0.3).forward(x, training=True, rng=np.random.default_rng(0))
    assert abs(out.mean() - 1.0) < 0.01
    assert set(np.unique(out)) == {0.0, 1 / 0.7}


def test_dropout_rate_validation():
    with pytest.raises(ValueError):
        L.Dropout(1.0)


def test_softmax_rows(rng):
    p = L.softmax(rng.normal(scale=5, size=(50, 4)))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((p > 0) & (p < 1))
    np.testing.assert_allclose(L.log_softmax(np.zeros((1, 4))), np.log(0.25) * np.ones((1, 4)))
