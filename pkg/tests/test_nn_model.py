import numpy as np
import pytest
from gradcheck import central_difference, rel_error

from labelnoise.losses import LossSpec, cross_entropy
from labelnoise.nn import (
    AdamState,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2x2,
    Model,
    ReLU,
    Softmax,
    StaleCacheError,
    adam_step,
    build,
    load_model,
    save_model,
)
from labelnoise.nn.checkpoint import CheckpointError, dumps, loads


def toy_net(seed=0):
    """4-class conv net touching every layer kind."""
    rng = np.random.default_rng(seed)
    layers = [Conv2D(1, 2, rng=rng), ReLU(), MaxPool2x2(), Dropout(0.25), Flatten(),
              Dense(2 * 2 * 2, 5, rng=rng), ReLU(), Dense(5, 4, rng=rng), Softmax()]
    for layer in layers:
        if "bias" in layer.params:
            layer.params["bias"][:] = rng.normal(scale=0.1, size=layer.params["bias"].shape)
    return Model(layers, (4, 4, 1), 4)


def test_small_cnn_chain():
    m = build("small_cnn", (28, 28, 1), 3, seed=0)
    kinds = [l.kind for l in m.layers]
    assert kinds == ["conv2d", "relu", "maxpool2x2", "conv2d", "relu", "maxpool2x2",
                     "conv2d", "relu", "dropout", "flatten", "dense", "relu", "dense", "softmax"]
    assert [l.filters for l in m.layers if l.kind == "conv2d"] == [16, 32, 64]
    p, _ = m.forward(np.zeros((2, 28, 28, 1)))
    assert p.shape == (2, 3)


def test_enhanced_cnn_chain():
    m = build("enhanced_cnn", (32, 32, 3), 3, seed=0)
    kinds = [l.kind for l in m.layers]
    assert kinds.count("conv2d") == 4 and kinds.count("maxpool2x2") == 3
    assert [l.filters for l in m.layers if l.kind == "conv2d"] == [32, 64, 128, 128]
    assert [l.out_features for l in m.layers if l.kind == "dense"] == [200, 3]


def test_build_rejects_odd_input():
    with pytest.raises(ValueError, match="divisible by 4"):
        build("small_cnn", (15, 15, 1), 3)
    with pytest.raises(ValueError, match="divisible by 8"):
        build("enhanced_cnn", (28, 28, 1), 3)


def test_build_overrides_and_seeding():
    m = build("small_cnn", (8, 8, 1), 3, seed=1, filters=[32, 64, 8], hidden=10)
    assert [l.filters for l in m.layers if l.kind == "conv2d"] == [32, 64, 8]
    a = build("small_cnn", (8, 8, 1), 3, seed=4).get_weights()
    b = build("small_cnn", (8, 8, 1), 3, seed=4).get_weights()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_forward_rows_sum_to_one(rng):
    m = build("small_cnn", (8, 8, 2), 5, seed=0)
    p, _ = m.forward(rng.random((7, 8, 8, 2)), training=True, seed=3)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.all((p > 0) & (p < 1))


def test_forward_shape_mismatch():
    m = build("small_cnn", (8, 8, 1), 3)
    with pytest.raises(ValueError, match="does not match"):
        m.forward(np.zeros((1, 8, 4, 1)))


def test_inference_ignores_dropout(rng):
    m = build("small_cnn", (8, 8, 1), 3, seed=2)
    x = rng.random((3, 8, 8, 1))
    a = m.predict_proba(x)
    b = m.predict_proba(x)
    np.testing.assert_array_equal(a, b)
    c, _ = m.forward(x, training=True, seed=1)
    assert not np.allclose(a, c)


def test_zero_final_layer_gives_uniform(rng):
    m = build("small_cnn", (8, 8, 1), 4, seed=0)
    final = m.layers[-2]
    final.params["weight"][:] = 0.0
    np.testing.assert_allclose(m.predict_proba(rng.random((5, 8, 8, 1))), 0.25, atol=1e-15)


def test_full_model_gradient_matches_finite_differences(rng):
    m = toy_net()
    x = rng.random((3, 4, 4, 1))
    y = np.array([0, 3, 2])

    def loss():
        p, _ = m.forward(x, training=True, seed=11)
        return cross_entropy(p, y).value

    p, cache = m.forward(x, training=True, seed=11)
    grads = m.backward(cache, cross_entropy(p, y).grad_logits)
    for g, param in zip(grads, m.parameters()):
        assert g.shape == param.shape
        assert rel_error(g, central_difference(loss, param)) < 1e-6


def test_input_gradient_matches_finite_differences(rng):
    m = toy_net(1)
    x = rng.random((2, 4, 4, 1))
    y = np.array([1, 2])
    p, cache = m.forward(x)
    _, dx = m.backward(cache, cross_entropy(p, y).grad_logits, return_input_grad=True)
    num = central_difference(lambda: cross_entropy(m.forward(x)[0], y).value, x)
    assert rel_error(dx, num) < 1e-6


def test_zero_upstream_gives_zero_gradients(rng):
    m = toy_net()
    _, cache = m.forward(rng.random((2, 4, 4, 1)))
    assert all(not g.any() for g in m.backward(cache, np.zeros((2, 4))))


def test_stale_cache_is_rejected(rng):
    m = toy_net()
    other = toy_net()
    x = rng.random((2, 4, 4, 1))
    _, cache = m.forward(x)
    with pytest.raises(StaleCacheError):
        other.backward(cache, np.zeros((2, 4)))
    m.set_weights(m.get_weights())
    with pytest.raises(StaleCacheError):
        m.backward(cache, np.zeros((2, 4)))


def test_model_requires_softmax_head():
    with pytest.raises(ValueError, match="softmax"):
        Model([Flatten(), Dense(4, 2)], (2, 2, 1), 2)
    with pytest.raises(ValueError, match="expected"):
        Model([Flatten(), Dense(4, 3), Softmax()], (2, 2, 1), 2)


def test_probability_clipping_prevents_nan():
    m = toy_net()
    m.layers[-2].params["bias"][:] = [2000.0, 0.0, 0.0, 0.0]
    p = m.predict_proba(np.ones((1, 4, 4, 1)))
    assert p[0, 1] == 0.0  # underflowed
    res = LossSpec("cross_entropy")(p, np.array([1]))
    assert np.isfinite(res.value) and np.all(np.isfinite(res.grad_logits))
    assert res.value == pytest.approx(-np.log(1e-12))


# --- Adam -------------------------------------------------------------------

def test_adam_first_step_by_hand():
    theta = [np.array([1.0])]
    state = AdamState.for_params(theta)
    adam_step(state, theta, [np.array([2.0])])
    assert state.t == 1
    np.testing.assert_allclose(state.m[0] / (1 - 0.9), 2.0)
    np.testing.assert_allclose(state.v[0] / (1 - 0.999), 4.0)
    np.testing.assert_allclose(theta[0], 1.0 - 0.001 * 2 / (2 + 1e-8), rtol=0, atol=1e-15)
    assert theta[0][0] == pytest.approx(0.999, abs=1e-9)


def test_adam_defaults():
    s = AdamState()
    assert (s.beta1, s.beta2, s.alpha) == (0.9, 0.999, 0.001)


def test_adam_zero_gradients_leave_params(rng):
    theta = [rng.normal(size=(3, 2)), rng.normal(size=4)]
    before = [t.copy() for t in theta]
    state = AdamState.for_params(theta)
    for _ in range(25):
        adam_step(state, theta, [np.zeros_like(t) for t in theta])
    assert all(np.array_equal(a, b) for a, b in zip(theta, before))
    assert state.t == 25


def test_adam_matches_recurrence(rng):
    theta = [rng.normal(size=5)]
    ref = theta[0].copy()
    state = AdamState.for_params(theta, alpha=0.01)
    m = v = np.zeros(5)
    for t in range(1, 6):
        g = rng.normal(size=5)
        adam_step(state, theta, [g])
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g**2
        ref = ref - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(theta[0], ref, atol=1e-14)
    assert np.all(state.v[0] >= 0)


def test_adam_shape_mismatch():
    theta = [np.zeros(3)]
    with pytest.raises(ValueError):
        adam_step(AdamState.for_params(theta), theta, [np.zeros(4)])


# --- checkpoints -------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path, rng):
    m = build("small_cnn", (8, 8, 1), 3, seed=9)
    path = tmp_path / "m.nlmd"
    save_model(m, path)
    assert path.read_bytes()[:4] == b"NLMD"
    back = load_model(path)
    assert back.architecture_name == "small_cnn" and back.input_shape == (8, 8, 1)
    x = rng.random((4, 8, 8, 1))
    np.testing.assert_array_equal(back.predict_proba(x), m.predict_proba(x))
    assert dumps(back) == dumps(m)


def test_checkpoint_errors():
    blob = dumps(toy_net())
    with pytest.raises(CheckpointError, match="magic"):
        loads(b"XXXX" + blob[4:])
    with pytest.raises(CheckpointError, match="version"):
        loads(blob[:4] + (999).to_bytes(4, "little") + blob[8:])
    with pytest.raises(CheckpointError, match="truncated"):
        loads(blob[:-3])
