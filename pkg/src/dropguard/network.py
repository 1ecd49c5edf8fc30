"""Convolutional classifier: architectures, forward modes, gradients, persistence.

A model is an :class:`Architecture` (ordered layer specs) plus
:class:`ModelParams` (the weight and bias arrays).  Forward passes run in
one of four modes:

* ``Deterministic`` - the plain network, no randomness;
* ``TrainDropout(rate)`` - Bernoulli mask at the dropout site, retained
  units scaled by 1/(1-rate), one fresh sub-network per example;
* ``TestDropout(rate)`` - the same mechanism applied at inference time,
  which is the package's main defense;
* ``Sap(...)`` - magnitude-proportional stochastic activation pruning at
  every hidden activation, with survivors reweighted by 1/q.

Inverted scaling (dividing by the keep probability inside the stochastic
pass) keeps the expected output of the masked layer equal to the
deterministic one, so rate 0 is element-exact equal to ``Deterministic``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import ParamsFileError, ShapeError, ZeroActivationError
from .ops import (
    bernoulli_mask,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2_backward,
    maxpool2_forward,
    relu_backward,
    relu_forward,
    softmax_xent,
    softmax_xent_backward,
)
from .rng import SeedStream
from .validation import as_image_batch, check_labels, check_pixel_range, check_rate

__all__ = [
    "Architecture",
    "Conv",
    "Dense",
    "Deterministic",
    "ForwardResult",
    "MaxPool",
    "ModelParams",
    "Relu",
    "Sap",
    "Softmax",
    "TestDropout",
    "TrainDropout",
    "architecture",
    "forward",
    "init_params",
    "input_gradient",
    "load_params",
    "parameter_shapes",
    "sap_probabilities",
    "save_params",
]


# ---------------------------------------------------------------------------
# layer specs and architectures


@dataclass(frozen=True)
class Conv:
    filters: int
    kernel: int = 3


@dataclass(frozen=True)
class MaxPool:
    size: int = 2


@dataclass(frozen=True)
class Dense:
    units: int


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Softmax:
    pass


@dataclass(frozen=True)
class Architecture:
    """Ordered layer specification with a single dropout site.

    ``dropout_layer`` indexes the Dense layer whose (post-activation)
    output hosts the dropout mask.
    """

    name: str
    input_shape: tuple[int, int, int]
    layers: tuple
    dropout_layer: int

    def __post_init__(self):
        if not isinstance(self.layers[self.dropout_layer], Dense):
            raise ShapeError(
                f"dropout_layer {self.dropout_layer} is not a Dense layer"
            )
        if not isinstance(self.layers[-1], Softmax):
            raise ShapeError("last layer must be Softmax")
        self.layer_shapes()  # fail fast if the chain does not shape-check

    def layer_shapes(self) -> list[tuple]:
        """Output shape after each layer; raises ShapeError on a bad chain."""
        shape = self.input_shape
        shapes = []
        for li, layer in enumerate(self.layers):
            if isinstance(layer, Conv):
                if len(shape) != 3:
                    raise ShapeError(f"layer {li}: Conv needs a 3-axis input, got {shape}")
                h, w, c = shape
                if h < layer.kernel or w < layer.kernel:
                    raise ShapeError(
                        f"layer {li}: spatial extents {h}x{w} smaller than kernel"
                    )
                shape = (h - layer.kernel + 1, w - layer.kernel + 1, layer.filters)
            elif isinstance(layer, MaxPool):
                h, w, c = shape
                if h % layer.size or w % layer.size:
                    raise ShapeError(
                        f"layer {li}: spatial extents {h}x{w} not divisible by pool size"
                    )
                shape = (h // layer.size, w // layer.size, c)
            elif isinstance(layer, Dense):
                shape = (layer.units,)
            elif isinstance(layer, (Relu, Softmax)):
                pass
            else:
                raise ShapeError(f"layer {li}: unknown layer spec {layer!r}")
            shapes.append(shape)
        return shapes

    @property
    def n_classes(self) -> int:
        return self.layers[-2].units

    @property
    def dropout_site(self) -> int:
        """Layer index after which the dropout mask applies (the activation
        following the dropout Dense layer, or the Dense itself)."""
        nxt = self.dropout_layer + 1
        if nxt < len(self.layers) and isinstance(self.layers[nxt], Relu):
            return nxt
        return self.dropout_layer

    def hidden_activation_sites(self) -> list[int]:
        """Indices of every post-activation hidden layer (all Relu layers)."""
        return [i for i, sp in enumerate(self.layers) if isinstance(sp, Relu)]

    def describe(self) -> str:
        parts = [f"input={self.input_shape}", f"dropout_layer={self.dropout_layer}"]
        for layer in self.layers:
            parts.append(repr(layer))
        return ";".join(parts)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.describe().encode()).hexdigest()


def _conv_block(filters):
    return (Conv(filters), Relu(), Conv(filters), Relu(), MaxPool())


_MNIST = Architecture(
    name="mnist",
    input_shape=(28, 28, 1),
    layers=(
        *_conv_block(32),
        *_conv_block(64),
        Dense(200), Relu(),
        Dense(200), Relu(),
        Dense(10), Softmax(),
    ),
    dropout_layer=10,
)

_CIFAR10 = Architecture(
    name="cifar10",
    input_shape=(32, 32, 3),
    layers=(
        *_conv_block(64),
        *_conv_block(128),
        Dense(256), Relu(),
        Dense(256), Relu(),
        Dense(10), Softmax(),
    ),
    dropout_layer=10,
)

# Desk-scale stand-in with the same topology, for fast experiments and tests.
_TINY = Architecture(
    name="tiny",
    input_shape=(32, 32, 3),
    layers=(
        *_conv_block(8),
        *_conv_block(16),
        Dense(32), Relu(),
        Dense(10), Softmax(),
    ),
    dropout_layer=10,
)

ARCHITECTURES = {"mnist": _MNIST, "cifar10": _CIFAR10, "tiny": _TINY}


def architecture(name: str) -> Architecture:
    try:
        return ARCHITECTURES[name]
    except KeyError:
        raise ValueError(
            f"unknown architecture {name!r}; choose from {sorted(ARCHITECTURES)}"
        ) from None


# ---------------------------------------------------------------------------
# forward modes


@dataclass(frozen=True)
class Deterministic:
    pass


@dataclass(frozen=True)
class TrainDropout:
    rate: float

    def __post_init__(self):
        check_rate(self.rate, "train dropout rate")


@dataclass(frozen=True)
class TestDropout:
    rate: float

    def __post_init__(self):
        check_rate(self.rate, "test dropout rate")


@dataclass(frozen=True)
class Sap:
    """Stochastic activation pruning at hidden activations.

    ``samples`` is the number of multinomial draws per layer (defaults to
    the layer width); ``layers`` restricts pruning to the given layer
    indices, or "all" for every hidden activation.
    """

    samples: int | None = None
    layers: tuple[int, ...] | str = "all"

    def __post_init__(self):
        if self.samples is not None and self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")


ForwardMode = Deterministic | TrainDropout | TestDropout | Sap


# ---------------------------------------------------------------------------
# parameters


@dataclass
class ModelParams:
    """Weights and biases for each parametric layer, in architecture order."""

    arch: Architecture
    weights: list = field(repr=False)
    biases: list = field(repr=False)

    @property
    def fingerprint(self) -> str:
        return self.arch.fingerprint

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.arch,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def parameter_shapes(arch: Architecture) -> list[tuple[tuple, tuple]]:
    """(weight shape, bias shape) for each parametric layer, in order."""
    shapes = []
    shape = arch.input_shape
    for layer in arch.layers:
        if isinstance(layer, Conv):
            h, w, c = shape
            shapes.append(((layer.kernel, layer.kernel, c, layer.filters),
                           (layer.filters,)))
            shape = (h - layer.kernel + 1, w - layer.kernel + 1, layer.filters)
        elif isinstance(layer, MaxPool):
            h, w, c = shape
            shape = (h // layer.size, w // layer.size, c)
        elif isinstance(layer, Dense):
            fan_in = int(np.prod(shape))
            shapes.append(((layer.units, fan_in), (layer.units,)))
            shape = (layer.units,)
    return shapes


def init_params(arch: Architecture, rng: SeedStream) -> ModelParams:
    """Fan-in-scaled zero-mean normal weights (variance 2/fan_in), zero biases."""
    weights, biases = [], []
    for wshape, bshape in parameter_shapes(arch):
        fan_in = int(np.prod(wshape[:-1])) if len(wshape) == 4 else wshape[1]
        weights.append(rng.normal(wshape, scale=np.sqrt(2.0 / fan_in)))
        biases.append(np.zeros(bshape))
    return ModelParams(arch, weights, biases)


# ---------------------------------------------------------------------------
# stochastic activation pruning algebra


def sap_probabilities(activations, samples: int | None = None):
    """Pruning distribution and reweighting factors for an activation vector.

    p_j is the activation's share of the layer's total L1 magnitude; a unit
    drawn at least once in ``samples`` multinomial draws is kept and scaled
    by 1/q_j with q_j = 1 - (1 - p_j)**samples.  Returns (p, q).
    """
    h = np.asarray(activations, dtype=np.float64)
    absh = np.abs(h)
    total = absh.sum(axis=-1, keepdims=True)
    if np.any(total <= 0.0):
        raise ZeroActivationError(
            "all-zero activation vector: pruning distribution undefined"
        )
    p = absh / total
    r_p = h.shape[-1] if samples is None else int(samples)
    q = 1.0 - (1.0 - p) ** r_p
    return p, q


def _sap_scale(flat: np.ndarray, mode: Sap, rng: SeedStream) -> np.ndarray:
    """Sampled keep/reweight multiplier for one batch of activations."""
    p, q = sap_probabilities(flat, mode.samples)
    r_p = flat.shape[-1] if mode.samples is None else int(mode.samples)
    counts = rng.multinomial(r_p, p)
    keep = counts > 0
    scale = np.zeros_like(p)
    scale[keep] = 1.0 / q[keep]
    return scale


# ---------------------------------------------------------------------------
# forward / backward engine


def _scale_sites(arch: Architecture, mode) -> list[int]:
    if isinstance(mode, (TrainDropout, TestDropout)):
        return [arch.dropout_site] if mode.rate > 0.0 else []
    if isinstance(mode, Sap):
        sites = arch.hidden_activation_sites()
        if mode.layers != "all":
            sites = [i for i in sites if i in set(mode.layers)]
        return sites
    return []


def _site_scale(flat, mode, rng):
    if isinstance(mode, (TrainDropout, TestDropout)):
        keep = 1.0 - mode.rate
        return bernoulli_mask(flat.shape, keep, rng) / keep
    return _sap_scale(flat, mode, rng)


def _forward_pass(params, xb, mode, rng=None, mask_scales=None, capture_hidden=False):
    """Run the network on a batch, recording what backward needs.

    Returns (logits, caches, scales, hidden).  ``scales`` maps layer index
    to the multiplier applied at that site; passing it back as
    ``mask_scales`` pins the sampled sub-network.
    """
    arch = params.arch
    sites = set(_scale_sites(arch, mode))
    if sites and mask_scales is None and rng is None:
        raise ValueError("stochastic mode requires an rng (or pinned mask_scales)")
    a = xb
    caches = []
    scales = {}
    hidden = [] if capture_hidden else None
    pi = 0  # parametric layer cursor
    for li, layer in enumerate(arch.layers):
        if isinstance(layer, Conv):
            a, cache = conv2d_forward(a, params.weights[pi], params.biases[pi])
            caches.append(("conv", pi, cache))
            pi += 1
        elif isinstance(layer, MaxPool):
            a, cache = maxpool2_forward(a)
            caches.append(("pool", None, cache))
        elif isinstance(layer, Dense):
            if a.ndim > 2:
                caches.append(("flatten", None, a.shape))
                a = a.reshape(a.shape[0], -1)
            a, cache = dense_forward(a, params.weights[pi], params.biases[pi])
            caches.append(("dense", pi, cache))
            pi += 1
        elif isinstance(layer, Relu):
            a, cache = relu_forward(a)
            caches.append(("relu", None, cache))
        elif isinstance(layer, Softmax):
            break
        if li in sites:
            flat = a.reshape(a.shape[0], -1)
            if mask_scales is not None:
                scale = mask_scales[li]
            else:
                scale = _site_scale(flat, mode, rng)
            a = (flat * scale).reshape(a.shape)
            caches.append(("mask", li, (scale, a.shape)))
            scales[li] = scale
        if capture_hidden:
            hidden.append(a)
    return a, caches, scales, hidden


def _backward_pass(dlogits, caches, params, want_param_grads=False):
    """Walk the caches in reverse from a logits gradient.

    Returns (dx, dweights, dbiases); the parameter gradients are lists
    aligned with params.weights/biases, or None when not requested.
    """
    dweights = [None] * len(params.weights) if want_param_grads else None
    dbiases = [None] * len(params.biases) if want_param_grads else None
    da = dlogits
    for kind, pi, cache in reversed(caches):
        if kind == "conv":
            da, dk, db = conv2d_backward(da, cache)
            if want_param_grads:
                dweights[pi], dbiases[pi] = dk, db
        elif kind == "dense":
            da, dw, db = dense_backward(da, cache)
            if want_param_grads:
                dweights[pi], dbiases[pi] = dw, db
        elif kind == "relu":
            da = relu_backward(da, cache)
        elif kind == "pool":
            da = maxpool2_backward(da, cache)
        elif kind == "flatten":
            da = da.reshape(cache)
        elif kind == "mask":
            scale, shape = cache
            da = (da.reshape(shape[0], -1) * scale).reshape(shape)
    return da, dweights, dbiases


class ForwardResult(NamedTuple):
    logits: np.ndarray
    probs: np.ndarray
    labels: np.ndarray
    hidden: list | None = None


def forward(params, x, mode=Deterministic(), rng=None, return_hidden=False):
    """Classify input(s): logits, softmax probabilities, and argmax labels.

    Ties in the argmax resolve to the lowest class index.  Stochastic
    modes draw one fresh sub-network per example from ``rng``.
    """
    xb, single = as_image_batch(x, params.arch.input_shape)
    check_pixel_range(xb)
    logits, _, _, hidden = _forward_pass(
        params, xb, mode, rng, capture_hidden=return_hidden
    )
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("forward pass produced non-finite logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    labels = logits.argmax(axis=1)
    if single:
        return ForwardResult(logits[0], probs[0], int(labels[0]),
                             hidden if return_hidden else None)
    return ForwardResult(logits, probs, labels, hidden if return_hidden else None)


# ---------------------------------------------------------------------------
# objectives and input gradients


def _objective_dlogits(logits, targets, objective, kappa):
    """Per-example objective values and gradients w.r.t. logits.

    ``xent``: cross-entropy toward the target class.
    ``margin``: max(max_{i != t} z_i - z_t, -kappa), the attack objective
    whose negative values certify a confident targeted misclassification.
    """
    n, m = logits.shape
    t = np.asarray(targets, dtype=np.int64)
    if objective == "xent":
        probs, losses = softmax_xent(logits, t)
        return losses, softmax_xent_backward(probs, t)
    if objective == "margin":
        masked = logits.copy()
        masked[np.arange(n), t] = -np.inf
        best_other = masked.argmax(axis=1)
        margins = masked[np.arange(n), best_other] - logits[np.arange(n), t]
        values = np.maximum(margins, -kappa)
        dlogits = np.zeros_like(logits)
        active = margins > -kappa
        rows = np.arange(n)[active]
        dlogits[rows, best_other[active]] = 1.0
        dlogits[rows, t[active]] = -1.0
        return values, dlogits
    raise ValueError(f"unknown objective {objective!r}")


def _input_gradient_batch(params, xb, targets, mode, rng, objective="xent",
                          kappa=0.0, mask_scales=None):
    """(values, grads, logits, scales) for a batch, one sub-network per example."""
    logits, caches, scales, _ = _forward_pass(params, xb, mode, rng, mask_scales)
    values, dlogits = _objective_dlogits(logits, targets, objective, kappa)
    dx, _, _ = _backward_pass(dlogits, caches, params)
    return values, dx, logits, scales


def input_gradient(params, x, target, mode=Deterministic(), rng=None,
                   objective="xent", kappa=0.0):
    """Gradient of the chosen objective w.r.t. the input pixels.

    Under a stochastic mode one sub-network is sampled for the call, and the
    gradient flows through the same scaled mask the forward pass used.
    """
    xb, single = as_image_batch(x, params.arch.input_shape)
    check_pixel_range(xb)
    targets = check_labels(
        np.atleast_1d(target), params.arch.n_classes, xb.shape[0]
    )
    _, grads, _, _ = _input_gradient_batch(
        params, xb, targets, mode, rng, objective, kappa
    )
    return grads[0] if single else grads


# ---------------------------------------------------------------------------
# persistence: "DGRD" parameter files


_MAGIC = b"DGRD"
_VERSION = 1


def save_params(params: ModelParams, path) -> None:
    """Write parameters: magic, version, architecture fingerprint, then the
    tensors as little-endian float64 with explicit shape headers."""
    tensors = []
    for w, b in zip(params.weights, params.biases):
        tensors.extend([w, b])
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(bytes.fromhex(params.fingerprint))
        fh.write(struct.pack("<I", len(tensors)))
        for t in tensors:
            fh.write(struct.pack("<B", t.ndim))
            fh.write(struct.pack(f"<{t.ndim}I", *t.shape))
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def _read_exact(fh, count, what):
    data = fh.read(count)
    if len(data) != count:
        raise ParamsFileError(f"truncated file while reading {what}")
    return data


def load_params(path, arch: Architecture) -> ModelParams:
    """Read a parameter file, checking magic, version, and fingerprint."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != _MAGIC:
            raise ParamsFileError(f"bad magic: {path} is not a parameter file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != _VERSION:
            raise ParamsFileError(f"unknown version {version}, expected {_VERSION}")
        fingerprint = _read_exact(fh, 32, "fingerprint").hex()
        if fingerprint != arch.fingerprint:
            raise ParamsFileError(
                f"fingerprint mismatch: file {fingerprint[:12]}..., "
                f"architecture {arch.name!r} {arch.fingerprint[:12]}..."
            )
        (ntensors,) = struct.unpack("<I", _read_exact(fh, 4, "tensor count"))
        tensors = []
        for ti in range(ntensors):
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, f"tensor {ti} rank"))
            shape = struct.unpack(
                f"<{ndim}I", _read_exact(fh, 4 * ndim, f"tensor {ti} shape")
            )
            n = int(np.prod(shape)) if ndim else 1
            raw = _read_exact(fh, 8 * n, f"tensor {ti} data")
            tensors.append(np.frombuffer(raw, dtype="<f8").reshape(shape).copy())
        if fh.read(1):
            raise ParamsFileError("trailing bytes after final tensor")
    if len(tensors) % 2:
        raise ParamsFileError("tensor count is odd; expected weight/bias pairs")
    weights = tensors[0::2]
    biases = tensors[1::2]
    expected = parameter_shapes(arch)
    if len(weights) != len(expected):
        raise ParamsFileError(
            f"file has {len(weights)} parametric layers, "
            f"architecture expects {len(expected)}"
        )
    for i, (w, b, (wshape, bshape)) in enumerate(zip(weights, biases, expected)):
        if w.shape != wshape or b.shape != bshape:
            raise ParamsFileError(
                f"parametric layer {i} has shapes {w.shape}/{b.shape}, "
                f"architecture expects {wshape}/{bshape}"
            )
    return ModelParams(arch, weights, biases)
