"""
Autoencoder Service for STRADDLE_BENCH
Dense ReLU autoencoder with sigmoid output, RMSE loss and plain gradient descent
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .errors import ShapeError
from .initialisers import InitialiserSpec, make_weights
from .numerics import Matrix, Rng

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = (64, 33, 64)
GRADIENT_GUARD = 1e-12
ACTIVATIONS = ("relu", "sigmoid", "linear")


def _activate(z: Matrix, activation: str) -> Matrix:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "sigmoid":
        return expit(z)
    return z


def _activation_derivative(z: Matrix, a: Matrix, activation: str) -> Matrix:
    if activation == "relu":
        # ReLU'(0) = 0
        return (z > 0.0).astype(np.float64)
    if activation == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass
class DenseLayer:
    weights: Matrix
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation '{self.activation}', expected one of {ACTIVATIONS}")
        if self.bias.shape != (self.weights.shape[1],):
            raise ShapeError(
                f"Bias of shape {self.bias.shape} does not match weights {self.weights.shape}"
            )

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


@dataclass
class Autoencoder:
    layers: List[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("Autoencoder needs at least one layer")
        for k, (current, following) in enumerate(zip(self.layers, self.layers[1:])):
            if current.fan_out != following.fan_in:
                raise ShapeError(
                    f"Layer {k} fan-out {current.fan_out} does not match layer {k + 1} fan-in {following.fan_in}"
                )
        if self.layers[0].fan_in != self.layers[-1].fan_out:
            raise ShapeError(
                f"Reconstruction shape mismatch: input {self.layers[0].fan_in}, output {self.layers[-1].fan_out}"
            )

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def weight_shapes(self) -> List[Tuple[int, int]]:
        return [layer.weights.shape for layer in self.layers]


@dataclass
class ForwardTrace:
    """Cached activations of one forward pass; ``post_activations[0]`` is the input"""

    pre_activations: List[Matrix] = field(default_factory=list)
    post_activations: List[Matrix] = field(default_factory=list)

    @property
    def output(self) -> Matrix:
        return self.post_activations[-1]


@dataclass
class Gradients:
    weights: List[Matrix]
    biases: List[np.ndarray]


def count_parameters(model: Autoencoder) -> int:
    return sum(layer.weights.size + layer.bias.size for layer in model.layers)


def build_autoencoder(
    input_dim: int,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    spec: Optional[InitialiserSpec] = None,
    rng: Optional[Rng] = None,
    output_activation: str = "sigmoid",
) -> Autoencoder:
    """ReLU hidden layers, one output layer back to ``input_dim``; zero biases"""
    if input_dim < 1:
        raise ValueError(f"input_dim must be positive, got {input_dim}")
    if spec is None:
        raise ValueError("An initialiser spec is required")
    if rng is None:
        rng = Rng(0)

    sizes = [input_dim, *hidden, input_dim]
    activations = ["relu"] * len(hidden) + [output_activation]

    layers = []
    for fan_in, fan_out, activation in zip(sizes, sizes[1:], activations):
        layers.append(DenseLayer(
            weights=make_weights(spec, rng, fan_in, fan_out),
            bias=np.zeros(fan_out),
            activation=activation,
        ))

    return Autoencoder(layers)


def forward(model: Autoencoder, x: Matrix) -> Tuple[Matrix, ForwardTrace]:
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"Input of shape {x.shape} does not match model input dimension {model.input_dim}")

    trace = ForwardTrace(post_activations=[x])
    a = x
    for layer in model.layers:
        z = a @ layer.weights + layer.bias
        a = _activate(z, layer.activation)
        trace.pre_activations.append(z)
        trace.post_activations.append(a)

    return a, trace


def rmse(yhat: Matrix, y: Matrix) -> float:
    """Root mean squared error over every entry of the batch jointly"""
    if yhat.shape != y.shape:
        raise ShapeError(f"Cannot compare reconstruction {yhat.shape} with target {y.shape}")
    return float(np.sqrt(np.mean((yhat - y) ** 2)))


def backward(model: Autoencoder, trace: ForwardTrace, y: Matrix) -> Gradients:
    """Exact RMSE gradients for every weight and bias"""
    yhat = trace.output
    loss = rmse(yhat, y)
    upstream = (yhat - y) / (yhat.size * max(loss, GRADIENT_GUARD))

    weight_grads: List[Matrix] = [None] * len(model.layers)
    bias_grads: List[np.ndarray] = [None] * len(model.layers)

    for k in reversed(range(len(model.layers))):
        layer = model.layers[k]
        z, a = trace.pre_activations[k], trace.post_activations[k + 1]
        delta = upstream * _activation_derivative(z, a, layer.activation)

        weight_grads[k] = trace.post_activations[k].T @ delta
        bias_grads[k] = delta.sum(axis=0)
        upstream = delta @ layer.weights.T

    return Gradients(weights=weight_grads, biases=bias_grads)


def sgd_step(model: Autoencoder, grads: Gradients, lr: float) -> None:
    """theta <- theta - lr * grad for every parameter"""
    if not lr > 0:
        raise ValueError(f"Learning rate must be positive, got {lr}")
    for layer, grad_w, grad_b in zip(model.layers, grads.weights, grads.biases):
        layer.weights = layer.weights - lr * grad_w
        layer.bias = layer.bias - lr * grad_b


def train_epoch(
    model: Autoencoder,
    train_x: Matrix,
    batch_size: Optional[int],
    lr: float,
    rng: Optional[Rng] = None,
) -> int:
    """One pass over ``train_x`` (target == input); returns the number of updates

    ``batch_size=None`` is full-batch training in fixed row order. Mini-batch
    training shuffles the rows with ``rng`` every epoch and keeps the final
    partial batch as-is.
    """
    rows = train_x.shape[0]
    if batch_size is None or batch_size == rows:
        _, trace = forward(model, train_x)
        sgd_step(model, backward(model, trace, train_x), lr)
        return 1

    if batch_size < 1 or batch_size > rows:
        raise ValueError(f"Batch size {batch_size} must be between 1 and the number of rows ({rows})")
    if rng is None:
        raise ValueError("Mini-batch training needs an Rng for shuffling")

    order = rng.permutation(rows)
    steps = 0
    for start in range(0, rows, batch_size):
        batch = train_x[order[start:start + batch_size]]
        _, trace = forward(model, batch)
        sgd_step(model, backward(model, trace, batch), lr)
        steps += 1

    return steps


def evaluate(model: Autoencoder, x: Matrix) -> float:
    """Reconstruction RMSE of ``x``; the model is not modified"""
    yhat, _ = forward(model, x)
    return rmse(yhat, x)


def steps_per_epoch(rows: int, batch_size: Optional[int]) -> int:
    if batch_size is None:
        return 1
    return math.ceil(rows / batch_size)
