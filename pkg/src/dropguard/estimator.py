"""Scikit-learn style wrapper around the convolutional classifier.

``ConvNetClassifier`` follows the estimator contract (constructor stores
hyperparameters verbatim, ``fit`` returns self, fitted state lives in
underscore attributes, ``get_params``/``set_params``/``clone`` work), so
the defended model composes with the wider ecosystem.  ``X`` may be a
batch of images (N, H, W, C) or the flat (N, n_pixels) layout pipelines
prefer.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .network import (
    Architecture,
    Deterministic,
    Sap,
    TestDropout,
    architecture,
    forward,
    init_params,
    load_params,
    save_params,
)
from .rng import SeedStream
from .training import TrainConfig, evaluate_accuracy, train
from .validation import as_image_batch, check_labels

__all__ = ["ConvNetClassifier"]


class ConvNetClassifier(BaseEstimator, ClassifierMixin):
    """Small convolutional image classifier with stochastic inference modes.

    Parameters
    ----------
    architecture : str or Architecture
        "mnist", "cifar10", "tiny", or a custom Architecture.
    train_dropout : float
        Dropout rate at the dropout site during fit (0 disables).
    inference_mode : str
        "deterministic", "test-dropout" (rate ``test_dropout``), or "sap"
        (``sap_samples`` multinomial draws per hidden layer).
    passes_per_example : int
        Stochastic passes per example used by ``evaluate``.
    random_state : int
        Seed for initialization, batching, and every stochastic pass.
    """

    def __init__(self, architecture="tiny", train_dropout=0.0, epochs=10,
                 batch_size=128, learning_rate=1e-3, optimizer="adam",
                 momentum=0.9, inference_mode="deterministic",
                 test_dropout=0.0, sap_samples=None, passes_per_example=10,
                 random_state=0):
        self.architecture = architecture
        self.train_dropout = train_dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.momentum = momentum
        self.inference_mode = inference_mode
        self.test_dropout = test_dropout
        self.sap_samples = sap_samples
        self.passes_per_example = passes_per_example
        self.random_state = random_state

    # -- plumbing

    def _architecture(self) -> Architecture:
        if isinstance(self.architecture, Architecture):
            return self.architecture
        return architecture(self.architecture)

    def _mode(self):
        if self.inference_mode == "deterministic":
            return Deterministic()
        if self.inference_mode == "test-dropout":
            return TestDropout(self.test_dropout) if self.test_dropout > 0 \
                else Deterministic()
        if self.inference_mode == "sap":
            return Sap(self.sap_samples)
        raise ValueError(f"unknown inference_mode {self.inference_mode!r}")

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("this ConvNetClassifier is not fitted yet")

    def _inference_rng(self, label):
        mode = self._mode()
        if isinstance(mode, Deterministic):
            return None
        return SeedStream(self.random_state).child(f"infer/{label}")

    # -- estimator API

    def fit(self, X, y, test_X=None, test_y=None):
        arch = self._architecture()
        cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            momentum=self.momentum,
            dropout_rate=self.train_dropout,
            seed=self.random_state,
        )
        rng = SeedStream(self.random_state)
        params0 = init_params(arch, rng.child("init"))
        self.params_, log = train(params0, X, y, cfg, test_X, test_y)
        self.history_ = log.rows
        self.classes_ = np.arange(arch.n_classes)
        self.n_features_in_ = int(np.prod(arch.input_shape))
        return self

    def decision_function(self, X):
        self._check_fitted()
        res = forward(self.params_, X, self._mode(), self._inference_rng("logits"))
        return res.logits

    def predict_proba(self, X):
        self._check_fitted()
        res = forward(self.params_, X, self._mode(), self._inference_rng("proba"))
        return res.probs

    def predict(self, X):
        self._check_fitted()
        res = forward(self.params_, X, self._mode(), self._inference_rng("predict"))
        return res.labels

    def evaluate(self, X, y) -> float:
        """Accuracy over (example, pass) pairs: ``passes_per_example``
        independent stochastic passes each (one pass when deterministic)."""
        self._check_fitted()
        return evaluate_accuracy(
            self.params_, X, y, self._mode(), self.passes_per_example,
            SeedStream(self.random_state).child("evaluate"),
        )

    # -- persistence

    def save(self, path) -> None:
        self._check_fitted()
        save_params(self.params_, path)

    @classmethod
    def load(cls, path, **params) -> "ConvNetClassifier":
        """Rebuild a fitted classifier from a parameter file."""
        est = cls(**params)
        arch = est._architecture()
        est.params_ = load_params(path, arch)
        est.classes_ = np.arange(arch.n_classes)
        est.n_features_in_ = int(np.prod(arch.input_shape))
        est.history_ = []
        return est
