"""Gradient-distribution study: how noisy is the gradient an attacker sees?

For a fixed image and objective, draw many single-sub-network input
gradients under a stochastic mode and summarize the per-dimension spread.
Wider distributions mean the attacker's stochastic optimization averages
over more disagreement, which is the mechanism behind the defense.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .network import Deterministic, Sap, TestDropout, TrainDropout, _input_gradient_batch
from .rng import SeedStream
from .validation import as_image_batch, check_pixel_range

__all__ = [
    "GradientSampleSet",
    "describe_mode",
    "sample_gradients",
    "variance_summary",
    "write_histograms_csv",
    "write_samples_csv",
    "write_variance_csv",
]


def describe_mode(mode) -> str:
    if isinstance(mode, Deterministic):
        return "deterministic"
    if isinstance(mode, TrainDropout):
        return f"train-dropout({mode.rate:g})"
    if isinstance(mode, TestDropout):
        return f"test-dropout({mode.rate:g})"
    if isinstance(mode, Sap):
        samples = "auto" if mode.samples is None else f"{mode.samples}"
        return f"sap({samples})"
    return repr(mode)


@dataclass
class GradientSampleSet:
    mode_label: str
    dims: list[int]
    samples: np.ndarray = field(repr=False)  # (n_samples, n_dims)
    image_id: int = 0
    seed: str = ""

    def __post_init__(self):
        if self.samples.shape[1] != len(self.dims):
            raise ValueError("one sample column per selected dimension")


def default_dims(n_pixels: int, count: int = 5) -> list[int]:
    """``count`` uniformly spaced flat pixel indices."""
    return [int(i) for i in np.linspace(0, n_pixels - 1, count).round()]


def sample_gradients(params, x, target, mode, n_samples: int = 50,
                     dims=None, rng: SeedStream | None = None,
                     objective: str = "margin", kappa: float = 0.0,
                     image_id: int = 0) -> GradientSampleSet:
    """Draw ``n_samples`` independent sub-network gradients, restricted to
    ``dims`` (default: 5 uniformly spaced input dimensions)."""
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    xb, single = as_image_batch(x, params.arch.input_shape)
    if not single:
        raise ValueError("sample_gradients takes a single image")
    check_pixel_range(xb)
    n_pixels = int(np.prod(params.arch.input_shape))
    dims = default_dims(n_pixels) if dims is None else [int(d) for d in dims]
    if not dims or min(dims) < 0 or max(dims) >= n_pixels:
        raise ValueError(f"dims must be non-empty indices below {n_pixels}")
    rep = np.broadcast_to(xb, (n_samples,) + xb.shape[1:]).copy()
    targets = np.full(n_samples, int(target))
    _, grads, _, _ = _input_gradient_batch(
        params, rep, targets, mode, rng, objective, kappa
    )
    samples = grads.reshape(n_samples, -1)[:, dims]
    return GradientSampleSet(
        mode_label=describe_mode(mode),
        dims=dims,
        samples=samples,
        image_id=image_id,
        seed=rng.describe() if rng is not None else "",
    )


def variance_summary(sets) -> list[dict]:
    """Unbiased per-dimension sample variances, one row per sample set."""
    if not sets:
        raise ValueError("need at least one sample set")
    rows = []
    for s in sets:
        per_dim = s.samples.var(axis=0, ddof=1)
        rows.append({
            "mode": s.mode_label,
            "mean_variance": float(per_dim.mean()),
            "per_dim_variance": [float(v) for v in per_dim],
            "dims": list(s.dims),
        })
    return rows


def write_samples_csv(sets, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "dim_index", "sample_index", "value"])
        for s in sets:
            for di, dim in enumerate(s.dims):
                for si in range(s.samples.shape[0]):
                    writer.writerow([s.mode_label, dim, si, s.samples[si, di]])


def write_variance_csv(summary_rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "mean_variance", "dim_index", "dim_variance"])
        for row in summary_rows:
            for dim, var in zip(row["dims"], row["per_dim_variance"]):
                writer.writerow([row["mode"], row["mean_variance"], dim, var])


def write_histograms_csv(sets, path, bins: int = 20) -> None:
    """Per-dimension histograms over each dimension's sample range."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "dim_index", "bin_left", "bin_right", "count"])
        for s in sets:
            for di, dim in enumerate(s.dims):
                col = s.samples[:, di]
                counts, edges = np.histogram(col, bins=bins)
                for b in range(bins):
                    writer.writerow([s.mode_label, dim, edges[b], edges[b + 1],
                                     int(counts[b])])
