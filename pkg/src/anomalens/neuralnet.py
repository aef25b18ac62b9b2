"""Minimal dense feed-forward networks with explicit backpropagation.

The networks here are deliberately small and transparent: a list of
(weights, biases, activation) layers evaluated with float64 numpy matmuls.
Besides the usual parameter gradients, the module exposes the gradient of
the reconstruction error with respect to the *input* vector, which the
contribution estimator iterates on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError
from .rng import PortableRng, derive_seed

ACTIVATIONS = ("sigmoid", "relu", "identity")


def apply_activation(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "sigmoid":
        # evaluate on the negative half-line only, for stability at large |z|
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "identity":
        return z
    raise ValueError(f"unknown activation tag: {tag!r}")


def activation_derivative(tag: str, out: np.ndarray) -> np.ndarray:
    """Derivative evaluated from the cached *output* of the activation.

    sigmoid': s(1-s); relu': 1 where the output is positive, 0 at and
    below zero (the tie at exactly 0 is deliberately broken to 0).
    """
    if tag == "sigmoid":
        return out * (1.0 - out)
    if tag == "relu":
        return (out > 0.0).astype(out.dtype)
    if tag == "identity":
        return np.ones_like(out)
    raise ValueError(f"unknown activation tag: {tag!r}")


@dataclass
class Layer:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray  # (out_dim,)
    activation: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.ndim != 1:
            raise DataError("layer expects a 2-D weight matrix and 1-D bias vector")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise DataError("bias length must equal the weight row count")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation tag: {self.activation!r}")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class DenseNetwork:
    """Ordered dense layers; adjacent dimensions must chain."""

    layers: list[Layer]
    input_dim: int

    def __post_init__(self):
        if not self.layers:
            raise DataError("network needs at least one layer")
        prev = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.in_dim != prev:
                raise DataError(
                    f"layer {i} expects input of size {layer.in_dim}, got {prev}"
                )
            prev = layer.out_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            [Layer(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers],
            self.input_dim,
        )


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 50
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise DataError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise DataError("weight_decay must be non-negative")


def init_network(
    layer_sizes: list[int], activations: list[str], seed: int
) -> DenseNetwork:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    if len(activations) != len(layer_sizes) - 1:
        raise DataError("need one activation tag per weight layer")
    rng = PortableRng(derive_seed(seed, 0x1417))
    layers = []
    for fan_in, fan_out, act in zip(layer_sizes, layer_sizes[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, fan_in * fan_out).reshape(fan_out, fan_in)
        layers.append(Layer(w, np.zeros(fan_out), act))
    return DenseNetwork(layers, layer_sizes[0])


def _as_batch(x: np.ndarray, dim: int, what: str = "input") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise DataError(f"{what} must have {dim} dimensions, got shape {x.shape}")
    return x


def forward_batch(net: DenseNetwork, x: np.ndarray) -> list[np.ndarray]:
    """Per-layer activations for a (records, input_dim) batch."""
    a = _as_batch(x, net.input_dim)
    outs = []
    for layer in net.layers:
        a = apply_activation(layer.activation, a @ layer.weights.T + layer.biases)
        outs.append(a)
    return outs


def forward(net: DenseNetwork, x: np.ndarray) -> list[np.ndarray]:
    """All intermediate activations for one record; the last is the output."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("forward expects a single 1-D record")
    return [a[0] for a in forward_batch(net, x)]


def _backprop(
    net: DenseNetwork,
    x: np.ndarray,
    activations: list[np.ndarray],
    cotangent: np.ndarray,
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Reverse sweep from an output cotangent.

    Returns per-layer (dW, db) and the cotangent pulled back to the input.
    """
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    cot = cotangent
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        delta = cot * activation_derivative(layer.activation, activations[i])
        below = activations[i - 1] if i > 0 else x
        grads[i] = (delta.T @ below, delta.sum(axis=0))
        cot = delta @ layer.weights
    return grads, cot


def grad_params(
    net: DenseNetwork, x: np.ndarray, target: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of (1/N) * sum_i (out_i - target_i)^2 for one record."""
    x = _as_batch(x, net.input_dim)
    target = _as_batch(target, net.output_dim, "target")
    acts = forward_batch(net, x)
    cot = (2.0 / net.output_dim) * (acts[-1] - target)
    grads, _ = _backprop(net, x, acts, cot)
    return grads


def grad_input(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    """Total derivative of the reconstruction MSE with respect to x.

    MSE(x) = (1/N) * ||net(x) - x||^2 depends on x both through the network
    and directly as the comparison target, so the gradient is
    (2/N) * (J(x) - I)^T (net(x) - x).
    """
    if net.output_dim != net.input_dim:
        raise DataError("grad_input requires an autoencoder-shaped network")
    xb = _as_batch(x, net.input_dim)
    acts = forward_batch(net, xb)
    residual_cot = (2.0 / net.input_dim) * (acts[-1] - xb)
    _, pulled_back = _backprop(net, xb, acts, residual_cot)
    return (pulled_back - residual_cot)[0]


def reconstruction_mse_batch(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    """(1/N) * ||net(x) - x||^2 per record."""
    xb = _as_batch(x, net.input_dim)
    out = forward_batch(net, xb)[-1]
    return np.mean((out - xb) ** 2, axis=1)


def sgd_train(
    net: DenseNetwork, dataset: np.ndarray, cfg: TrainConfig
) -> DenseNetwork:
    """Minibatch SGD on the mean reconstruction MSE plus L2 weight decay.

    The input network is left untouched; a trained copy is returned.
    Shuffling is an epoch-level permutation drawn from the seeded stream,
    the final short minibatch is used as-is, and weight decay applies to
    weights only. Identical configs produce bit-identical parameters.
    """
    data = _as_batch(dataset, net.input_dim, "dataset")
    t = data.shape[0]
    if t == 0:
        raise DataError("training dataset is empty")
    if cfg.batch_size > t:
        raise DataError(f"batch_size {cfg.batch_size} exceeds dataset size {t}")

    net = net.copy()
    rng = PortableRng(derive_seed(cfg.seed, 0x5D0))
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        order = rng.permutation(t)
        for start in range(0, t, cfg.batch_size):
            batch = data[order[start : start + cfg.batch_size]]
            b = batch.shape[0]
            acts = forward_batch(net, batch)
            err = acts[-1] - batch
            loss = np.mean(err**2)
            if not np.isfinite(loss):
                raise NumericalError(f"training loss diverged at epoch {epoch}")
            cot = (2.0 / (b * net.output_dim)) * err
            grads, _ = _backprop(net, batch, acts, cot)
            for layer, (dw, db) in zip(net.layers, grads):
                if cfg.weight_decay:
                    dw = dw + cfg.weight_decay * layer.weights
                layer.weights -= lr * dw
                layer.biases -= lr * db
    return net
