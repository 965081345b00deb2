"""Seeded random streams with deterministic child splitting.

Every stochastic routine in the package takes a :class:`RandomStream`.
Child streams are derived as ``blake2b(f"{seed}:{key}")`` truncated to 64
bits, so a task's draws depend only on the parent seed and its key, never
on execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def split_seed(seed: int, key) -> int:
    digest = hashlib.blake2b(f"{int(seed)}:{key}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RandomStream:
    """A numpy ``Generator`` tagged with the seed that produced it."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, key) -> "RandomStream":
        return RandomStream(split_seed(self.seed, key))

    @property
    def counter(self) -> int:
        """Position of the underlying PCG64 state (changes with every draw)."""
        return int(self.gen.bit_generator.state["state"]["state"])

    def __repr__(self):
        return f"RandomStream(seed={self.seed})"


def as_stream(rng) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    if rng is None:
        raise ValueError("an explicit seed or RandomStream is required")
    return RandomStream(int(rng))
