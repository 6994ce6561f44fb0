"""Reproducible random streams.

Every stochastic routine takes a ``numpy.random.Generator`` built on the
counter-based Philox4x32 bit generator.  The 128-bit Philox key is derived
from ``(master seed, purpose tag, replication index)`` with BLAKE2b, so
replications can run in any order (or in parallel) and still reproduce.

Pair coins U(X, Y) of the small-world graph are not drawn from a stream at
all: they are a pure hash of ``(key, i, j, round)`` (SplitMix64 finaliser),
which makes the edge "memo" stateless and vectorisable.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_key(seed: int, tag: str = "", index: int = 0) -> int:
    """128-bit integer key for ``(seed, tag, index)``."""
    h = hashlib.blake2b(digest_size=16, person=b"ppnav-stream")
    h.update(struct.pack("<Q", int(seed) & _MASK64))
    h.update(tag.encode("utf-8"))
    h.update(struct.pack("<q", int(index)))
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    """Independent generator for one purpose / replication."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, tag, index)))


def sub_seed(seed: int, tag: str, index: int = 0) -> int:
    """64-bit seed for a child component (e.g. the point set of replication i)."""
    return derive_key(seed, tag, index) & _MASK64


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_uniform(key: int, *parts) -> np.ndarray:
    """Uniform(0, 1) doubles that are a deterministic function of the inputs.

    ``parts`` are broadcast integer arrays; the result has their broadcast
    shape.  53 random bits, never exactly 0.
    """
    with np.errstate(over="ignore"):
        acc = np.full(np.broadcast(*parts).shape if parts else (), key & _MASK64, dtype=np.uint64)
        acc = _splitmix(acc)
        for p in parts:
            acc = _splitmix(acc ^ np.asarray(p, dtype=np.int64).astype(np.uint64))
    return ((acc >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / (1 << 53))
