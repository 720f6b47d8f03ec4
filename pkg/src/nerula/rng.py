"""Counter-based random streams with deterministic splitting.

Every stochastic choice in the package draws from an RngStream. Streams are
cheap to split by label, and a split never perturbs the parent, so adding a
new consumer of randomness does not shift the draws of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

ALGORITHM = "philox4x64"

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    if isinstance(label, str):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"stream labels must be int or str, got {type(label).__name__}")


class RngStream:
    """A named, seedable source of randomness backed by the Philox generator.

    `split(*labels)` derives an independent child stream from the parent seed
    and the labels alone; it does not consume or advance the parent's state.
    Identical seeds give bit-identical draw sequences.
    """

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"

    def split(self, *labels) -> "RngStream":
        if not labels:
            raise ValueError("split() requires at least one label")
        s = self.seed
        for label in labels:
            s = _splitmix64(s ^ _label_to_int(label))
        return RngStream(s)

    # Draws delegate to one fixed numpy generator so the byte sequence is a
    # pure function of the seed.

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)
