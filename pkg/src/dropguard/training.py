"""Mini-batch training and accuracy evaluation.

Training samples a fresh dropout sub-network for every example in every
batch (dropped units contribute zero gradient), averages gradients over
the batch, and applies Adam or SGD-with-momentum updates.  Everything is
driven by a single seed, so two runs with the same configuration produce
identical parameter files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .network import (
    Deterministic,
    ModelParams,
    TrainDropout,
    _forward_pass,
    _backward_pass,
)
from .ops import softmax_xent, softmax_xent_backward
from .rng import SeedStream
from .validation import as_image_batch, check_labels, check_pixel_range, check_rate

__all__ = [
    "AdamState",
    "SgdMomentumState",
    "TrainConfig",
    "TrainLog",
    "accuracy_records",
    "evaluate_accuracy",
    "train",
    "write_metrics_csv",
]


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # "adam" | "sgd-momentum"
    momentum: float = 0.9
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        check_rate(self.dropout_rate, "train dropout rate")
        if self.optimizer not in ("adam", "sgd-momentum"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class AdamState:
    """Adam with bias correction; moments live alongside the parameters."""

    def __init__(self, tensors, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(t) for t in tensors]
        self.v = [np.zeros_like(t) for t in tensors]

    def step(self, tensors, grads, lr):
        """Update tensors in place from gradients; deterministic."""
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for t, g, m, v in zip(tensors, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            t -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SgdMomentumState:
    def __init__(self, tensors, momentum=0.9):
        self.momentum = momentum
        self.velocity = [np.zeros_like(t) for t in tensors]

    def step(self, tensors, grads, lr):
        for t, g, v in zip(tensors, grads, self.velocity):
            v *= self.momentum
            v -= lr * g
            t += v


def _make_optimizer(cfg: TrainConfig, tensors):
    if cfg.optimizer == "adam":
        return AdamState(tensors)
    return SgdMomentumState(tensors, cfg.momentum)


@dataclass
class TrainLog:
    rows: list  # per-epoch dicts: epoch, train_loss, train_acc, test_acc


def _batch_grads(params, xb, yb, mode, rng):
    """Mean loss, accuracy, and batch-averaged parameter gradients."""
    logits, caches, _, _ = _forward_pass(params, xb, mode, rng)
    probs, losses = softmax_xent(logits, yb)
    dlogits = softmax_xent_backward(probs, yb) / xb.shape[0]
    _, dweights, dbiases = _backward_pass(dlogits, caches, params,
                                          want_param_grads=True)
    acc = float(np.mean(logits.argmax(axis=1) == yb))
    return float(losses.mean()), acc, dweights, dbiases


def train(params: ModelParams, X, y, cfg: TrainConfig,
          test_X=None, test_y=None) -> tuple[ModelParams, TrainLog]:
    """Train a copy of ``params``; the input object is left untouched.

    Per training case a fresh sub-network mask is sampled (when
    ``cfg.dropout_rate`` > 0), the cross-entropy gradients are averaged
    over the batch, and the optimizer applies one update per batch.
    """
    arch = params.arch
    X, _ = as_image_batch(X, arch.input_shape)
    check_pixel_range(X)
    y = check_labels(y, arch.n_classes, X.shape[0])
    if X.shape[0] == 0:
        raise ValueError("training dataset is empty")
    if test_X is not None:
        test_X, _ = as_image_batch(test_X, arch.input_shape)
        test_y = check_labels(test_y, arch.n_classes, test_X.shape[0])

    params = params.copy()
    tensors = params.weights + params.biases
    opt = _make_optimizer(cfg, tensors)
    root = SeedStream(cfg.seed)
    mode = TrainDropout(cfg.dropout_rate) if cfg.dropout_rate > 0 else Deterministic()

    n = X.shape[0]
    rows = []
    for epoch in range(cfg.epochs):
        erng = root.child(f"epoch{epoch}")
        order = erng.child("shuffle").permutation(n)
        mrng = erng.child("masks")
        loss_sum = 0.0
        correct = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, acc, dweights, dbiases = _batch_grads(
                params, X[idx], y[idx], mode, mrng
            )
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            opt.step(tensors, dweights + dbiases, cfg.learning_rate)
            loss_sum += loss * len(idx)
            correct += acc * len(idx)
        row = {
            "epoch": epoch,
            "train_loss": loss_sum / n,
            "train_acc": correct / n,
            "test_acc": "",
        }
        if test_X is not None:
            row["test_acc"] = evaluate_accuracy(params, test_X, test_y)
        rows.append(row)
    return params, TrainLog(rows)


def evaluate_accuracy(params: ModelParams, X, y, mode=Deterministic(),
                      passes: int = 1, rng: SeedStream | None = None,
                      batch_size: int = 512) -> float:
    """Fraction of (example, pass) pairs classified correctly.

    Stochastic modes are scored over ``passes`` independent forward passes
    per example; deterministic evaluation needs a single pass.
    """
    arch = params.arch
    X, _ = as_image_batch(X, arch.input_shape)
    check_pixel_range(X)
    y = check_labels(y, arch.n_classes, X.shape[0])
    if passes < 1:
        raise ValueError(f"passes must be >= 1, got {passes}")
    if isinstance(mode, Deterministic):
        passes = 1
    correct = 0
    for pass_i in range(passes):
        prng = rng.child(f"pass{pass_i}") if rng is not None else None
        for start in range(0, X.shape[0], batch_size):
            xb = X[start : start + batch_size]
            logits, _, _, _ = _forward_pass(params, xb, mode, prng)
            correct += int(np.sum(logits.argmax(axis=1) == y[start : start + batch_size]))
    return correct / (X.shape[0] * passes)


def accuracy_records(params: ModelParams, X, y, mode=Deterministic(),
                     passes: int = 1, rng: SeedStream | None = None,
                     batch_size: int = 512):
    """Like evaluate_accuracy, but also returns one record per
    (example, pass) pair so the number is auditable from disk."""
    arch = params.arch
    X, _ = as_image_batch(X, arch.input_shape)
    check_pixel_range(X)
    y = check_labels(y, arch.n_classes, X.shape[0])
    if isinstance(mode, Deterministic):
        passes = 1
    rows = []
    for pass_i in range(passes):
        prng = rng.child(f"pass{pass_i}") if rng is not None else None
        for start in range(0, X.shape[0], batch_size):
            xb = X[start : start + batch_size]
            logits, _, _, _ = _forward_pass(params, xb, mode, prng)
            preds = logits.argmax(axis=1)
            for j, pred in enumerate(preds):
                label = int(y[start + j])
                rows.append({
                    "example_id": start + j,
                    "pass": pass_i,
                    "predicted": int(pred),
                    "label": label,
                    "correct": bool(pred == label),
                })
    accuracy = float(np.mean([r["correct"] for r in rows])) if rows else 0.0
    return accuracy, rows


def write_metrics_csv(log: TrainLog, path) -> None:
    """Per-epoch metrics as CSV rows (epoch, train_loss, train_acc, test_acc)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "test_acc"])
        for row in log.rows:
            writer.writerow([row["epoch"], row["train_loss"],
                             row["train_acc"], row["test_acc"]])
