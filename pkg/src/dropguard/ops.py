"""Layer primitives with hand-written forward and backward passes.

Every op works on float64 arrays and accepts either a single example or a
batch with a leading N axis; the backward function consumes the cache its
forward returned and emits gradients shaped exactly like the forward
inputs.  Convolutions use stride 1 and no padding, pooling uses 2x2
windows, all as fixed by the model family this package implements.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeError
from .rng import SeedStream

__all__ = [
    "bernoulli_mask",
    "clip01",
    "conv2d_backward",
    "conv2d_forward",
    "dense_backward",
    "dense_forward",
    "maxpool2_backward",
    "maxpool2_forward",
    "relu_backward",
    "relu_forward",
    "softmax_xent",
    "softmax_xent_backward",
]


def _as_batch(x: np.ndarray, item_ndim: int):
    """View x as a batch; report whether a leading axis was added."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == item_ndim:
        return x[None], True
    if x.ndim == item_ndim + 1:
        return x, False
    raise ShapeError(
        f"input must have {item_ndim} axes (single) or {item_ndim + 1} (batch), got {x.ndim}"
    )


def _unbatch(y: np.ndarray, single: bool) -> np.ndarray:
    return y[0] if single else y


# ---------------------------------------------------------------------------
# convolution


def conv2d_forward(x, kernels, bias):
    """Valid-padding stride-1 convolution.

    x: (H, W, C) or (N, H, W, C); kernels: (kh, kw, C, K); bias: (K,).
    Returns (output, cache) with output spatial extents (H-kh+1, W-kw+1).
    """
    xb, single = _as_batch(x, 3)
    kernels = np.asarray(kernels, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if kernels.ndim != 4:
        raise ShapeError(f"kernels must have 4 axes (kh, kw, C, K), got {kernels.ndim}")
    n, h, w, c = xb.shape
    kh, kw, cin, k = kernels.shape
    if cin != c:
        raise ShapeError(f"kernel channel axis has extent {cin}, input has {c} channels")
    if bias.shape != (k,):
        raise ShapeError(f"bias axis 0 has extent {bias.shape}, expected ({k},)")
    if h < kh or w < kw:
        raise ShapeError(
            f"input spatial extents ({h}, {w}) smaller than kernel ({kh}, {kw})"
        )
    oh, ow = h - kh + 1, w - kw + 1
    out = np.zeros((n, oh, ow, k))
    # One GEMM per kernel offset keeps memory flat and BLAS saturated.
    for i in range(kh):
        for j in range(kw):
            patch = xb[:, i : i + oh, j : j + ow, :].reshape(-1, c)
            out += (patch @ kernels[i, j]).reshape(n, oh, ow, k)
    out += bias
    cache = (xb, kernels, single)
    return _unbatch(out, single), cache


def conv2d_backward(dout, cache):
    """Gradients of conv2d_forward w.r.t. input, kernels, and bias."""
    xb, kernels, single = cache
    dyb, _ = _as_batch(dout, 3)
    n, h, w, c = xb.shape
    kh, kw, _, k = kernels.shape
    oh, ow = h - kh + 1, w - kw + 1
    if dyb.shape != (n, oh, ow, k):
        raise ShapeError(
            f"output gradient has shape {dyb.shape}, expected {(n, oh, ow, k)}"
        )
    dyf = dyb.reshape(-1, k)
    dx = np.zeros_like(xb)
    dkernels = np.empty_like(kernels)
    for i in range(kh):
        for j in range(kw):
            patch = xb[:, i : i + oh, j : j + ow, :].reshape(-1, c)
            dkernels[i, j] = patch.T @ dyf
            dx[:, i : i + oh, j : j + ow, :] += (dyf @ kernels[i, j].T).reshape(
                n, oh, ow, c
            )
    dbias = dyb.sum(axis=(0, 1, 2))
    return _unbatch(dx, single), dkernels, dbias


# ---------------------------------------------------------------------------
# dense


def dense_forward(x, weights, bias):
    """Affine map z = W y + b with W of shape (m, n)."""
    xb, single = _as_batch(x, 1)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    m, n = weights.shape
    if xb.shape[1] != n:
        raise ShapeError(
            f"input axis {'0' if single else '1'} has extent {xb.shape[1]}, "
            f"weight matrix expects {n} columns"
        )
    if bias.shape != (m,):
        raise ShapeError(f"bias axis 0 has extent {bias.shape}, expected ({m},)")
    out = xb @ weights.T + bias
    return _unbatch(out, single), (xb, weights, single)


def dense_backward(dout, cache):
    xb, weights, single = cache
    dyb, _ = _as_batch(dout, 1)
    dweights = dyb.T @ xb
    dbias = dyb.sum(axis=0)
    dx = dyb @ weights
    return _unbatch(dx, single), dweights, dbias


# ---------------------------------------------------------------------------
# activations, pooling, loss


def relu_forward(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0), (x > 0.0)


def relu_backward(dout, cache):
    # Gradient flows only where the input was strictly positive.
    return np.asarray(dout) * cache


def maxpool2_forward(x):
    """2x2 max pooling; each spatial extent must be even."""
    xb, single = _as_batch(x, 3)
    n, h, w, c = xb.shape
    if h % 2 or w % 2:
        raise ShapeError(f"spatial extents ({h}, {w}) must be even for 2x2 pooling")
    oh, ow = h // 2, w // 2
    windows = (
        xb.reshape(n, oh, 2, ow, 2, c)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(n, oh, ow, 4, c)
    )
    # argmax returns the first maximum, which is row-major scan order here.
    idx = windows.argmax(axis=3)
    out = np.take_along_axis(windows, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return _unbatch(out, single), (idx, (n, h, w, c), single)


def maxpool2_backward(dout, cache):
    idx, (n, h, w, c), single = cache
    dyb, _ = _as_batch(dout, 3)
    oh, ow = h // 2, w // 2
    dwindows = np.zeros((n, oh, ow, 4, c))
    np.put_along_axis(dwindows, idx[:, :, :, None, :], dyb[:, :, :, None, :], axis=3)
    dx = (
        dwindows.reshape(n, oh, ow, 2, 2, c)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(n, h, w, c)
    )
    return _unbatch(dx, single)


def softmax_xent(logits, targets):
    """Softmax probabilities and cross-entropy loss, max-shifted for stability.

    logits: (m,) or (N, m); targets: int or (N,) of class indices.
    Returns (probs, loss) with the same batching as the input, and the
    per-example gradient is ``softmax_xent_backward(probs, targets)``.
    """
    lb, single = _as_batch(logits, 1)
    n, m = lb.shape
    if m < 2:
        raise ShapeError(f"logit axis has extent {m}, need at least 2 classes")
    t = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if t.shape != (n,):
        raise ShapeError(f"target axis 0 has extent {t.shape}, expected ({n},)")
    if t.min() < 0 or t.max() >= m:
        raise ValueError(f"targets must lie in [0, {m})")
    shifted = lb - lb.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    probs = np.exp(logp)
    losses = -logp[np.arange(n), t]
    if single:
        return probs[0], float(losses[0])
    return probs, losses


def softmax_xent_backward(probs, targets):
    """Per-example loss gradient w.r.t. logits: probs minus one-hot target."""
    pb, single = _as_batch(probs, 1)
    t = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    dlogits = pb.copy()
    dlogits[np.arange(pb.shape[0]), t] -= 1.0
    return _unbatch(dlogits, single)


# ---------------------------------------------------------------------------
# stochastic masking and the pixel box


def bernoulli_mask(shape, keep_prob: float, rng: SeedStream) -> np.ndarray:
    """0/1 mask with independent P(1) = keep_prob entries."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    return (rng.random(shape) < keep_prob).astype(np.float64)


def clip01(x) -> np.ndarray:
    """Project every element onto [0, 1]; in-range values pass unchanged."""
    return np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
