"""Dataset ingestion and generation.

Two on-disk formats are supported bit-exactly: the big-endian IDX layout
used by the classic handwritten-digit corpus, and the 3073-byte-record
binary batches of the 32x32 color corpus.  Pixels are scaled to [0, 1] on
load.  A deterministic synthetic glyph generator provides desk-scale
stand-in data when the real corpora are not on disk.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataFormatError
from .rng import SeedStream

__all__ = [
    "Dataset",
    "load_cifar10_bin",
    "load_mnist_idx",
    "make_synthetic",
    "write_cifar10_bin",
    "write_idx_images",
    "write_idx_labels",
]

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801
_CIFAR_RECORD = 3073


@dataclass
class Dataset:
    images: np.ndarray = field(repr=False)  # (N, H, W, C) float64 in [0, 1]
    labels: np.ndarray = field(repr=False)  # (N,) int64
    split: str = ""
    checksum: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataFormatError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise DataFormatError("pixels must lie in [0, 1] after ingestion")

    def __len__(self):
        return len(self.images)

    def subset(self, n: int, start: int = 0) -> "Dataset":
        return Dataset(self.images[start : start + n],
                       self.labels[start : start + n],
                       self.split, self.checksum)


def _sha256_files(paths) -> str:
    digest = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            digest.update(fh.read())
    return digest.hexdigest()


def load_mnist_idx(images_path, labels_path, split: str = "") -> Dataset:
    """Parse an IDX image/label file pair (big-endian headers, uint8 data)."""
    with open(images_path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise DataFormatError(f"{images_path}: truncated IDX header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != _IDX_IMAGES_MAGIC:
            raise DataFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, "
                f"expected 0x{_IDX_IMAGES_MAGIC:08x}"
            )
        raw = fh.read()
    if len(raw) != count * rows * cols:
        raise DataFormatError(
            f"{images_path}: payload has {len(raw)} bytes, "
            f"expected {count * rows * cols}"
        )
    images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols, 1)

    with open(labels_path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise DataFormatError(f"{labels_path}: truncated IDX header")
        magic, lcount = struct.unpack(">II", header)
        if magic != _IDX_LABELS_MAGIC:
            raise DataFormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, "
                f"expected 0x{_IDX_LABELS_MAGIC:08x}"
            )
        lraw = fh.read()
    if len(lraw) != lcount:
        raise DataFormatError(
            f"{labels_path}: payload has {len(lraw)} bytes, expected {lcount}"
        )
    if lcount != count:
        raise DataFormatError(
            f"image file has {count} items but label file has {lcount}"
        )
    labels = np.frombuffer(lraw, dtype=np.uint8).astype(np.int64)
    return Dataset(
        images.astype(np.float64) / 255.0,
        labels,
        split=split,
        checksum=_sha256_files([images_path, labels_path]),
    )


def write_idx_images(images_uint8: np.ndarray, path) -> None:
    """images_uint8: (N, H, W) or (N, H, W, 1) uint8."""
    a = np.asarray(images_uint8, dtype=np.uint8)
    if a.ndim == 4 and a.shape[-1] == 1:
        a = a[..., 0]
    n, h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", _IDX_IMAGES_MAGIC, n, h, w))
        fh.write(a.tobytes())


def write_idx_labels(labels, path) -> None:
    a = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", _IDX_LABELS_MAGIC, len(a)))
        fh.write(a.tobytes())


def load_cifar10_bin(paths, split: str = "") -> Dataset:
    """Parse binary batches of 3073-byte records (label + RGB planes)."""
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    images, labels = [], []
    for p in paths:
        with open(p, "rb") as fh:
            raw = fh.read()
        if not raw or len(raw) % _CIFAR_RECORD:
            raise DataFormatError(
                f"{p}: size {len(raw)} is not a multiple of {_CIFAR_RECORD}-byte records"
            )
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, _CIFAR_RECORD)
        labels.append(records[:, 0].astype(np.int64))
        planes = records[:, 1:].reshape(-1, 3, 32, 32)  # channel-major planes
        images.append(planes.transpose(0, 2, 3, 1))
    return Dataset(
        np.concatenate(images).astype(np.float64) / 255.0,
        np.concatenate(labels),
        split=split,
        checksum=_sha256_files(paths),
    )


def write_cifar10_bin(images_uint8: np.ndarray, labels, path) -> None:
    """images_uint8: (N, 32, 32, 3) uint8."""
    a = np.asarray(images_uint8, dtype=np.uint8)
    lab = np.asarray(labels, dtype=np.uint8)
    records = np.empty((len(a), _CIFAR_RECORD), dtype=np.uint8)
    records[:, 0] = lab
    records[:, 1:] = a.transpose(0, 3, 1, 2).reshape(len(a), -1)
    with open(path, "wb") as fh:
        fh.write(records.tobytes())


# ---------------------------------------------------------------------------
# synthetic glyphs


def _smooth(a: np.ndarray, passes: int = 3) -> np.ndarray:
    for _ in range(passes):
        p = np.pad(a, ((1, 1), (1, 1), (0, 0)), mode="edge")
        a = (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]
             + p[1:-1, 1:-1]) / 5.0
    return a


def make_synthetic(n: int, input_shape=(28, 28, 1), n_classes: int = 10,
                   seed: int = 0, noise: float = 0.06,
                   split: str = "train") -> Dataset:
    """Balanced glyph dataset: one smooth random template per class,
    jittered by small shifts, intensity scaling, and pixel noise.

    Deterministic in (n, shape, classes, seed, split).  The class
    templates depend only on the seed, so splits of the same seed share
    classes while drawing disjoint jitter; the data is easily separable
    and small models reach high accuracy in a few epochs.
    """
    h, w, c = input_shape
    rng = SeedStream(seed).child("synthetic")
    pad = 4
    trng = rng.child("templates")
    templates = []
    for _ in range(n_classes):
        field_ = trng.normal((h + 2 * pad, w + 2 * pad, c))
        field_ = _smooth(field_, passes=4)
        lo, hi = field_.min(), field_.max()
        templates.append(0.1 + 0.8 * (field_ - lo) / (hi - lo))

    labels = np.arange(n) % n_classes
    srng = rng.child(f"samples/{split}")
    shifts = srng.integers(-3, 4, size=(n, 2))
    scales = 0.75 + 0.25 * srng.random(n)
    noise_field = srng.normal((n, h, w, c), scale=noise)
    images = np.empty((n, h, w, c))
    for i in range(n):
        dy, dx = shifts[i]
        tpl = templates[labels[i]]
        images[i] = tpl[pad + dy : pad + dy + h, pad + dx : pad + dx + w, :]
    images = np.clip(images * scales[:, None, None, None] + noise_field, 0.0, 1.0)
    digest = hashlib.sha256(images.tobytes() + labels.tobytes()).hexdigest()
    return Dataset(images, labels.astype(np.int64), split=split, checksum=digest)
