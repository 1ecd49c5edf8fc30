"""Deterministic random streams with labeled substreams.

Every stochastic component in the package draws from a :class:`SeedStream`.
A stream is identified by a 64-bit seed plus a path of string labels; the
same (seed, labels) always produces the same draws, on any platform, and
sibling substreams are statistically independent regardless of how much
either one has been consumed.  The underlying generator is Philox, a
counter-based generator with well-separated keyed streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["SeedStream"]


def _label_words(label: str) -> tuple[int, int]:
    # Two stable 32-bit words per label, independent of PYTHONHASHSEED.
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return (
        int.from_bytes(digest[0:4], "little"),
        int.from_bytes(digest[4:8], "little"),
    )


class SeedStream:
    """A reproducible random stream addressed by (seed, label path)."""

    def __init__(self, seed: int, _path: tuple[str, ...] = ()):
        if not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
        self.seed = int(seed)
        self.path = _path
        spawn_key = tuple(w for label in _path for w in _label_words(label))
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=spawn_key)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def child(self, label: str) -> "SeedStream":
        """Derive an independent substream; draws here never affect it."""
        return SeedStream(self.seed, self.path + (str(label),))

    def describe(self) -> str:
        """Stable textual identity, recorded next to results."""
        return "/".join([str(self.seed), *self.path])

    def __repr__(self):
        return f"SeedStream({self.describe()!r})"

    # Thin pass-throughs for the draw types the package uses.

    def random(self, shape=None):
        return self.generator.random(shape)

    def normal(self, shape=None, scale=1.0):
        return self.generator.standard_normal(shape) * scale

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def multinomial(self, n: int, pvals: np.ndarray) -> np.ndarray:
        return self.generator.multinomial(n, pvals)

    def choice(self, a, size=None, replace=True):
        return self.generator.choice(a, size=size, replace=replace)
