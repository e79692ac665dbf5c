"""Minimal dense-network engine.

Construction, deterministic mini-batch SGD training, forward passes that record
every layer's input and output, and JSON checkpoints.
"""
import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_softmax, softmax

from errors import (
    CheckpointParseError,
    CheckpointShapeError,
    DivergenceError,
    RejectedInputError,
)

logger = logging.getLogger(__name__)

# --- CONFIGURATION ---
ACTIVATIONS = ("relu", "sigmoid", "softmax", "identity")
CHECKPOINT_FORMAT = "freqx-densenet"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    hidden: Tuple[int, ...] = (64, 64)
    activation: str = "relu"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.1
    batch_size: int = 32
    seed: int = 0


# --- DOMAIN TYPES ---

@dataclass
class DenseLayer:
    """One fully connected layer: ``activation(weights @ x + bias)``."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise RejectedInputError(f"weights must be a matrix, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise RejectedInputError(
                f"bias length {self.bias.shape} does not match {self.weights.shape[0]} weight rows"
            )
        if not np.all(np.isfinite(self.weights)) or not np.all(np.isfinite(self.bias)):
            raise RejectedInputError("layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise RejectedInputError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenseNet:
    layers: List[DenseLayer]
    input_dim: int

    def __post_init__(self):
        if not self.layers:
            raise RejectedInputError("a network needs at least one layer")
        expected = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.in_dim != expected:
                raise RejectedInputError(
                    f"layer {i} expects {layer.in_dim} inputs but receives {expected}"
                )
            if layer.activation == "softmax" and i != len(self.layers) - 1:
                raise RejectedInputError(f"softmax is only allowed on the final layer (found at {i})")
            expected = layer.out_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim


@dataclass
class ActivationTrace:
    per_layer_inputs: List[np.ndarray]
    per_layer_outputs: List[np.ndarray]
    logits: np.ndarray
    predicted_class: int


@dataclass
class LabeledDataset:
    """Samples (n x d), integer labels and feature names.

    ``feature_groups`` lists index groups that must stay together (one-hot
    encodings of a single categorical column).
    """

    samples: np.ndarray
    labels: np.ndarray
    class_count: int
    feature_names: List[str]
    feature_groups: List[List[int]] = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 2:
            raise RejectedInputError("samples must be a matrix")
        if self.labels.shape != (self.samples.shape[0],):
            raise RejectedInputError("one label per sample is required")
        if len(self.feature_names) != self.samples.shape[1]:
            raise RejectedInputError(
                f"{len(self.feature_names)} feature names for {self.samples.shape[1]} features"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise RejectedInputError(f"labels must lie in [0, {self.class_count})")
        missing = sorted(set(range(self.class_count)) - set(self.labels.tolist()))
        if missing:
            raise RejectedInputError(f"classes without samples: {missing}")
        if not self.feature_groups:
            self.feature_groups = [[j] for j in range(self.samples.shape[1])]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_features(self) -> int:
        return self.samples.shape[1]

    def select_features(self, indices: Sequence[int]) -> "LabeledDataset":
        """Returns a copy restricted to ``indices`` (in the given order)."""
        indices = [int(j) for j in indices]
        position = {j: p for p, j in enumerate(indices)}
        groups = [[position[j] for j in g if j in position] for g in self.feature_groups]
        return LabeledDataset(
            samples=self.samples[:, indices],
            labels=self.labels.copy(),
            class_count=self.class_count,
            feature_names=[self.feature_names[j] for j in indices],
            feature_groups=[g for g in groups if g],
        )


# --- CONSTRUCTION ---

def build_net(input_dim: int, class_count: int, config: NetConfig = NetConfig(), seed: int = 0) -> DenseNet:
    """Glorot-uniform weights, zero biases, softmax output layer."""
    rng = np.random.default_rng(seed)
    dims = [input_dim, *config.hidden, class_count]
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        a = np.sqrt(6.0 / (fan_in + fan_out))
        activation = "softmax" if i == len(dims) - 2 else config.activation
        layers.append(
            DenseLayer(
                weights=rng.uniform(-a, a, size=(fan_out, fan_in)),
                bias=np.zeros(fan_out),
                activation=activation,
            )
        )
    return DenseNet(layers=layers, input_dim=input_dim)


def activate(name: str, z: np.ndarray) -> np.ndarray:
    """Applies an activation along the last axis."""
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return expit(z)
    if name == "softmax":
        return softmax(z, axis=-1)
    return z


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


# --- FORWARD PASSES ---

def forward_traced(net: DenseNet, x) -> ActivationTrace:
    """Runs one sample through the net, recording every layer's input and output."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise RejectedInputError(f"expected input of length {net.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise RejectedInputError("input contains non-finite values")

    inputs, outputs = [], []
    a = x
    for layer in net.layers:
        inputs.append(a)
        a = activate(layer.activation, layer.weights @ a + layer.bias)
        outputs.append(a)
    return ActivationTrace(
        per_layer_inputs=inputs,
        per_layer_outputs=outputs,
        logits=a,
        predicted_class=int(np.argmax(a)),
    )


def _forward_cache(net: DenseNet, X: np.ndarray):
    pre, post = [], [X]
    a = X
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        a = activate(layer.activation, z)
        pre.append(z)
        post.append(a)
    return pre, post


def forward_batch(net: DenseNet, X) -> np.ndarray:
    """Final-layer outputs for every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != net.input_dim:
        raise RejectedInputError(f"expected {net.input_dim} features, got {X.shape[1]}")
    return _forward_cache(net, X)[1][-1]


def class_probabilities(net: DenseNet, X) -> np.ndarray:
    """Row-wise class probabilities; a softmax is applied unless the net already ends in one."""
    out = forward_batch(net, X)
    if net.layers[-1].activation == "softmax":
        return out
    return softmax(out, axis=-1)


def predict(net: DenseNet, X) -> np.ndarray:
    return np.argmax(forward_batch(net, X), axis=1)


def accuracy(net: DenseNet, data: LabeledDataset) -> float:
    if data.n_samples == 0:
        return 0.0
    return float(np.mean(predict(net, data.samples) == data.labels))


# --- TRAINING ---

def loss_and_gradients(net: DenseNet, X, y) -> Tuple[float, List[Tuple[np.ndarray, np.ndarray]]]:
    """Mean cross-entropy over the batch and its gradient for every (weights, bias) pair."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    pre, post = _forward_cache(net, X)
    batch = X.shape[0]
    rows = np.arange(batch)
    final = net.layers[-1]

    # the softmax output layer shares its normalizer with the loss
    log_p = log_softmax(pre[-1] if final.activation == "softmax" else post[-1], axis=1)
    loss = float(-np.mean(log_p[rows, y]))

    delta = np.exp(log_p)
    delta[rows, y] -= 1.0
    delta /= batch
    if final.activation != "softmax":
        delta = delta * _activation_grad(final.activation, pre[-1], post[-1])

    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        grads[i] = (delta.T @ post[i], delta.sum(axis=0))
        if i > 0:
            below = net.layers[i - 1]
            delta = (delta @ layer.weights) * _activation_grad(below.activation, pre[i - 1], post[i])
    return loss, grads


def train(
    net: DenseNet,
    data: LabeledDataset,
    config: TrainConfig,
    on_epoch: Optional[Callable[[int, DenseNet, float], None]] = None,
) -> DenseNet:
    """Plain mini-batch SGD on a copy of ``net``; the shuffle order comes from ``config.seed``."""
    if data.n_features != net.input_dim:
        raise RejectedInputError(f"dataset has {data.n_features} features, net expects {net.input_dim}")
    trained = copy.deepcopy(net)
    rng = np.random.default_rng(config.seed)
    n = data.n_samples
    batch_size = max(1, int(config.batch_size))

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, grads = loss_and_gradients(trained, data.samples[idx], data.labels[idx])
            for layer, (d_w, d_b) in zip(trained.layers, grads):
                layer.weights -= config.learning_rate * d_w
                layer.bias -= config.learning_rate * d_b

        loss, _ = loss_and_gradients(trained, data.samples, data.labels)
        if not np.isfinite(loss):
            raise DivergenceError(epoch, loss)
        logger.debug("epoch %d loss %.6f", epoch, loss)
        if on_epoch is not None:
            on_epoch(epoch, trained, loss)

    if config.epochs:
        logger.info("trained %d epochs, final loss %.6f", config.epochs, loss)
    return trained


# --- CHECKPOINTS ---

def checkpoint_text(net: DenseNet) -> str:
    """Canonical JSON text of a net; float repr round-trips every weight exactly."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_dim": net.input_dim,
        "layers": [
            {
                "rows": layer.out_dim,
                "cols": layer.in_dim,
                "activation": layer.activation,
                "weights": [float(v) for v in layer.weights.ravel()],
                "bias": [float(v) for v in layer.bias],
            }
            for layer in net.layers
        ],
    }
    return json.dumps(payload, indent=1, sort_keys=True)


def model_hash(net: DenseNet) -> str:
    return hashlib.sha256(checkpoint_text(net).encode()).hexdigest()


def save_checkpoint(net: DenseNet, path) -> None:
    with open(path, "w") as f:
        f.write(checkpoint_text(net))


def _field(record, key, where):
    try:
        return record[key]
    except (KeyError, TypeError):
        raise CheckpointParseError(f"{where}: missing field {key!r}") from None


def load_checkpoint(path) -> DenseNet:
    """Reads a checkpoint written by ``save_checkpoint``."""
    with open(path, "r") as f:
        text = f.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise CheckpointParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None

    input_dim = _field(payload, "input_dim", "checkpoint")
    records = _field(payload, "layers", "checkpoint")
    if not isinstance(records, list):
        raise CheckpointParseError("checkpoint: field 'layers' must be a list")

    layers = []
    for i, record in enumerate(records):
        where = f"layers[{i}]"
        rows = _field(record, "rows", where)
        cols = _field(record, "cols", where)
        weights = _field(record, "weights", where)
        bias = _field(record, "bias", where)
        activation = _field(record, "activation", where)
        try:
            weights = np.array(weights, dtype=np.float64)
            bias = np.array(bias, dtype=np.float64)
        except (TypeError, ValueError):
            raise CheckpointParseError(f"{where}: weights and bias must be numeric lists") from None
        if weights.ndim != 1 or weights.size != rows * cols:
            raise CheckpointShapeError(
                f"{where}: declared {rows}x{cols} but weights hold {weights.size} values"
            )
        if bias.shape != (rows,):
            raise CheckpointShapeError(f"{where}: declared {rows} rows but bias holds {bias.size} values")
        try:
            layers.append(DenseLayer(weights.reshape(rows, cols), bias, activation))
        except RejectedInputError as e:
            raise CheckpointParseError(f"{where}: {e}") from None

    try:
        return DenseNet(layers=layers, input_dim=input_dim)
    except RejectedInputError as e:
        raise CheckpointShapeError(str(e)) from None
