import math

import numpy as np
import pytest

from core.errors import ShapeError
from core.initialisers import InitialiserSpec
from core.network import (
    Autoencoder,
    DenseLayer,
    Gradients,
    backward,
    build_autoencoder,
    count_parameters,
    evaluate,
    forward,
    rmse,
    sgd_step,
    steps_per_epoch,
    train_epoch,
)
from core.numerics import Rng, sample_uniform

STRADDLED = InitialiserSpec(kind="straddled")
IDENTITY = InitialiserSpec(kind="identity")
GLOROT = InitialiserSpec(kind="glorotuniform")


def _copy_model(model):
    return Autoencoder([DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in model.layers])


def test_build_autoencoder_shapes():
    model = build_autoencoder(100, spec=STRADDLED)
    assert model.weight_shapes == [(100, 64), (64, 33), (33, 64), (64, 100)]
    assert [l.activation for l in model.layers] == ["relu", "relu", "relu", "sigmoid"]
    assert all(not l.bias.any() for l in model.layers)

    assert build_autoencoder(784, spec=GLOROT, rng=Rng(0)).weight_shapes[-1] == (64, 784)
    assert build_autoencoder(4, [4, 3, 4], spec=STRADDLED).weight_shapes == [(4, 4), (4, 3), (3, 4), (4, 4)]


def test_autoencoder_checks_dimension_chain():
    with pytest.raises(ShapeError):
        Autoencoder([
            DenseLayer(np.zeros((3, 2)), np.zeros(2), "relu"),
            DenseLayer(np.zeros((3, 3)), np.zeros(3), "sigmoid"),
        ])
    with pytest.raises(ShapeError):
        DenseLayer(np.zeros((3, 2)), np.zeros(3), "relu")


def test_forward_zero_weights_gives_half():
    model = Autoencoder([
        DenseLayer(np.zeros((3, 2)), np.zeros(2), "relu"),
        DenseLayer(np.zeros((2, 3)), np.zeros(3), "sigmoid"),
    ])
    yhat, _ = forward(model, np.random.default_rng(0).random((5, 3)))
    np.testing.assert_array_equal(yhat, np.full((5, 3), 0.5))


def test_forward_rejects_wrong_width():
    model = build_autoencoder(5, [3], spec=STRADDLED)
    with pytest.raises(ShapeError):
        forward(model, np.zeros((2, 4)))


def test_square_identity_autoencoder_reconstructs_exactly():
    x = sample_uniform(Rng(1), 1000, 16, 0.0, 1.0)
    model = build_autoencoder(16, [16, 16, 16], spec=IDENTITY, output_activation="relu")
    yhat, _ = forward(model, x)
    np.testing.assert_array_equal(yhat, x)
    assert evaluate(model, x) == 0.0

    linear_out = build_autoencoder(16, [16, 16, 16], spec=IDENTITY, output_activation="linear")
    assert evaluate(linear_out, x) == 0.0


def test_straddled_first_pass_is_linear():
    x = sample_uniform(Rng(2), 200, 100, 0.0, 1.0)
    model = build_autoencoder(100, spec=STRADDLED)
    _, trace = forward(model, x)

    for pre, post in zip(trace.pre_activations[:-1], trace.post_activations[1:-1]):
        np.testing.assert_array_equal(pre, post)

    product = x
    for layer in model.layers:
        product = product @ layer.weights
    np.testing.assert_allclose(trace.pre_activations[-1], product, rtol=0, atol=1e-12)


def test_rmse_examples():
    y = np.random.default_rng(0).random((4, 3))
    assert rmse(y, y) == 0.0
    assert rmse(y + 0.25, y) == pytest.approx(0.25)
    assert rmse(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]])) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ShapeError):
        rmse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_rmse_is_permutation_invariant():
    model = build_autoencoder(6, [4, 3, 4], spec=GLOROT, rng=Rng(3))
    x = sample_uniform(Rng(4), 20, 6, 0.0, 1.0)
    shuffled = x[np.random.default_rng(5).permutation(20)]
    assert evaluate(model, x) == pytest.approx(evaluate(model, shuffled), rel=1e-12)
    assert evaluate(model, x) >= 0.0


def test_backward_is_zero_at_exact_reconstruction():
    x = sample_uniform(Rng(1), 10, 5, 0.0, 1.0)
    model = build_autoencoder(5, [5], spec=IDENTITY, output_activation="relu")
    _, trace = forward(model, x)
    grads = backward(model, trace, x)
    for g in grads.weights + grads.biases:
        assert not np.any(g)


def test_backward_single_linear_unit_sign():
    for w, x, y in [(2.0, 1.5, 1.0), (0.5, 2.0, 3.0), (-1.0, -2.0, 0.5)]:
        model = Autoencoder([DenseLayer(np.array([[w]]), np.zeros(1), "linear")])
        _, trace = forward(model, np.array([[x]]))
        grads = backward(model, trace, np.array([[y]]))
        assert np.sign(grads.weights[0][0, 0]) == np.sign(w * x - y) * np.sign(x)
        assert grads.weights[0][0, 0] == pytest.approx(np.sign(w * x - y) * x)


def _min_abs_hidden_preactivation(model, x):
    _, trace = forward(model, x)
    return min(np.min(np.abs(z)) for z, layer in zip(trace.pre_activations, model.layers) if layer.activation == "relu")


def _loss(model, x):
    yhat, _ = forward(model, x)
    return rmse(yhat, x)


def _relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)


def test_gradients_match_central_differences():
    h = 1e-5
    rng = np.random.default_rng(2024)
    checked = 0
    seed = 0

    while checked < 100:
        seed += 1
        dims = int(rng.integers(1, 7))
        hidden = [int(v) for v in rng.integers(1, 7, size=int(rng.integers(1, 4)))]
        batch = int(rng.integers(1, 9))
        spec = InitialiserSpec(kind=["glorotuniform", "henormal", "orthogonal"][seed % 3])

        model = build_autoencoder(dims, hidden, spec=spec, rng=Rng(seed))
        for layer in model.layers:
            layer.bias = rng.normal(scale=0.1, size=layer.bias.shape)
        x = rng.random((batch, dims))

        # ReLU kinks inside the probe step make finite differences meaningless
        if _min_abs_hidden_preactivation(model, x) < 1e-3:
            continue

        _, trace = forward(model, x)
        grads = backward(model, trace, x)

        for k, layer in enumerate(model.layers):
            for param, grad in ((layer.weights, grads.weights[k]), (layer.bias, grads.biases[k])):
                for index in np.ndindex(param.shape):
                    original = param[index]
                    param[index] = original + h
                    up = _loss(model, x)
                    param[index] = original - h
                    down = _loss(model, x)
                    param[index] = original

                    numeric = (up - down) / (2 * h)
                    assert _relative_error(grad[index], numeric) < 1e-4, (seed, k, index)
        checked += 1


def test_sgd_step_quadratic():
    model = Autoencoder([DenseLayer(np.array([[0.0]]), np.zeros(1), "linear")])
    # d/dw of (w - 3)^2 / 2 at w = 0
    sgd_step(model, Gradients(weights=[np.array([[-3.0]])], biases=[np.zeros(1)]), lr=0.1)
    assert model.layers[0].weights[0, 0] == pytest.approx(0.3)


def test_sgd_step_zero_gradients_and_bad_lr():
    model = build_autoencoder(4, [3], spec=GLOROT, rng=Rng(0))
    before = _copy_model(model)
    zeros = Gradients(
        weights=[np.zeros_like(l.weights) for l in model.layers],
        biases=[np.zeros_like(l.bias) for l in model.layers],
    )
    sgd_step(model, zeros, lr=0.1)
    for a, b in zip(model.layers, before.layers):
        np.testing.assert_array_equal(a.weights, b.weights)

    with pytest.raises(ValueError):
        sgd_step(model, zeros, lr=0.0)


def test_full_batch_epoch_is_one_step():
    x = sample_uniform(Rng(0), 30, 6, 0.0, 1.0)
    model = build_autoencoder(6, [4, 3, 4], spec=GLOROT, rng=Rng(1))
    reference = _copy_model(model)

    assert train_epoch(model, x, None, 0.1) == 1

    _, trace = forward(reference, x)
    sgd_step(reference, backward(reference, trace, x), 0.1)
    for a, b in zip(model.layers, reference.layers):
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.bias, b.bias)


def test_minibatch_step_count():
    assert steps_per_epoch(5000, 256) == 20
    x = sample_uniform(Rng(0), 5000, 3, 0.0, 1.0)
    model = build_autoencoder(3, [2], spec=GLOROT, rng=Rng(0))
    assert train_epoch(model, x, 256, 0.1, Rng(1)) == 20


def test_minibatch_rejects_oversized_batch():
    model = build_autoencoder(3, [2], spec=GLOROT, rng=Rng(0))
    with pytest.raises(ValueError):
        train_epoch(model, np.zeros((4, 3)), 5, 0.1, Rng(0))


def test_training_is_deterministic():
    x = sample_uniform(Rng(3), 64, 8, 0.0, 1.0)

    def train(seed):
        model = build_autoencoder(8, [6, 5, 6], spec=GLOROT, rng=Rng(seed))
        shuffle = Rng(seed, stream="shuffle")
        losses = []
        for _ in range(5):
            train_epoch(model, x, 16, 0.1, shuffle)
            losses.append(evaluate(model, x))
        return model, losses

    (m1, l1), (m2, l2) = train(7), train(7)
    assert l1 == l2
    for a, b in zip(m1.layers, m2.layers):
        np.testing.assert_array_equal(a.weights, b.weights)


def test_training_reduces_loss():
    x = sample_uniform(Rng(5), 100, 10, 0.0, 1.0)
    model = build_autoencoder(10, [8, 6, 8], spec=STRADDLED)
    start = evaluate(model, x)
    for _ in range(50):
        train_epoch(model, x, None, 0.1)
    assert evaluate(model, x) < start


def test_count_parameters():
    model = build_autoencoder(4, [4, 3, 4], spec=STRADDLED)
    assert count_parameters(model) == (16 + 4) + (12 + 3) + (12 + 4) + (16 + 4)
