"""Shared fixtures: small trained models on synthetic data, cached per session."""

import numpy as np
import pytest

from dropguard import TrainConfig, init_params, make_synthetic, train
from dropguard.network import (
    Architecture,
    Conv,
    Dense,
    MaxPool,
    Relu,
    Softmax,
)
from dropguard.rng import SeedStream

# Desk-scale stand-in with the paper model's topology at 1/4 width.
TINY28 = Architecture(
    name="tiny28",
    input_shape=(28, 28, 1),
    layers=(
        Conv(8), Relu(), Conv(8), Relu(), MaxPool(),
        Conv(16), Relu(), Conv(16), Relu(), MaxPool(),
        Dense(32), Relu(), Dense(10), Softmax(),
    ),
    dropout_layer=10,
)

# All-dense toy for cheap gradient and mode checks.
TOY = Architecture(
    name="toy",
    input_shape=(4, 4, 1),
    layers=(Dense(12), Relu(), Dense(8), Relu(), Dense(3), Softmax()),
    dropout_layer=2,
)


@pytest.fixture(scope="session")
def synth28():
    train_ds = make_synthetic(1500, (28, 28, 1), seed=11, split="train")
    test_ds = make_synthetic(400, (28, 28, 1), seed=11, split="test")
    return train_ds, test_ds


@pytest.fixture(scope="session")
def tiny_model(synth28):
    """tiny28 trained with dropout rate 0.3 on the synthetic glyphs."""
    train_ds, test_ds = synth28
    cfg = TrainConfig(epochs=6, batch_size=64, dropout_rate=0.3, seed=3)
    params0 = init_params(TINY28, SeedStream(3).child("init"))
    params, _ = train(params0, train_ds.images, train_ds.labels, cfg)
    return params


@pytest.fixture(scope="session")
def toy_model():
    """Toy model trained to memorize a 60-example 3-class set."""
    rng = SeedStream(21)
    X = rng.child("x").random((60, 4, 4, 1))
    y = np.arange(60) % 3
    # nudge class structure into the data so it is separable
    for c in range(3):
        X[y == c, c, c, 0] = 0.95
    params0 = init_params(TOY, rng.child("init"))
    cfg = TrainConfig(epochs=60, batch_size=16, learning_rate=3e-3, seed=4)
    params, _ = train(params0, X, y, cfg)
    return params, X, y
