"""Shared fixtures; living at the repository root also puts the modules on sys.path."""
import numpy as np
import pytest

from data_io import PLANTED_SIGNAL, TWO_FEATURE_BLOBS, SyntheticSpec, generate_synthetic, split_dataset
from nn_core import DenseLayer, DenseNet, NetConfig, TrainConfig, build_net, train


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_net(rng, dims, activation="relu", final="identity"):
    """Random dense net with the given layer widths and non-trivial biases."""
    layers = []
    for i in range(len(dims) - 1):
        layers.append(
            DenseLayer(
                weights=rng.normal(size=(dims[i + 1], dims[i])) / np.sqrt(dims[i]),
                bias=rng.normal(size=dims[i + 1]),
                activation=final if i == len(dims) - 2 else activation,
            )
        )
    return DenseNet(layers=layers, input_dim=dims[0])


@pytest.fixture
def blobs():
    data = generate_synthetic(SyntheticSpec(kind=TWO_FEATURE_BLOBS, n=200, noise_sigma=0.5), seed=3)
    return split_dataset(data, 0.25, seed=4)


@pytest.fixture
def planted_split():
    spec = SyntheticSpec(kind=PLANTED_SIGNAL, n=300, d=20, informative_indices=tuple(range(5)))
    return split_dataset(generate_synthetic(spec, seed=7), 0.25, seed=8)


@pytest.fixture
def toy_net(planted_split):
    net = build_net(planted_split.train.n_features, planted_split.train.class_count, NetConfig(hidden=(16,)), seed=1)
    return train(net, planted_split.train, TrainConfig(epochs=20, learning_rate=0.1, batch_size=32, seed=2))
