"""
Counter-based random streams keyed by genealogy.

Every node of a simulated tree owns a 64-bit key derived from its parent's
key and its child rank. All randomness consumed by the node (lifetime,
Brownian increment, offspring count) is a deterministic hash of that key.
Consequences:

* a replica is fully determined by ``(seed, replica index)``;
* batching replicas together, or simulating them one at a time, gives
  bit-identical results;
* a pruned run is an exact sub-tree of the unpruned run at the same key,
  which couples the two for side-by-side comparisons.

Derivation (fixed across versions)::

    replica_key(seed, i, tag) = mix64(mix64(seed ^ tag_hash) + (i + 1) * GOLDEN)
    child_key(key, rank)      = mix64(key + (rank + 1) * GOLDEN)
    uniform(key, slot)        = ((mix64(key ^ SLOT[slot]) >> 11) + 0.5) * 2**-53

``mix64`` is the SplitMix64 finalizer.
"""

from __future__ import annotations

import zlib

import numpy as np
from scipy.special import ndtri

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1

# per-purpose slot salts for draws taken from one node key
SLOT_LIFE = 0
SLOT_NORMAL = 1
SLOT_OFFSPRING = 2
SLOT_EXTRA = 3
_SLOTS = np.array(
    [0x243F6A8885A308D3, 0x13198A2E03707344, 0xA4093822299F31D0, 0x082EFA98EC4E6C89],
    dtype=np.uint64,
)

# rank used for the continuation of a lineage through a checkpoint split
CHECKPOINT_RANK = 1 << 20


def mix64(z):
    """SplitMix64 finalizer, vectorised over ``uint64`` arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def child_keys(keys, ranks):
    keys = np.asarray(keys, dtype=np.uint64)
    ranks = np.asarray(ranks, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(keys + (ranks + np.uint64(1)) * GOLDEN)


def uniforms(keys, slot: int):
    """Uniform draws on the open interval (0, 1), one per key."""
    h = mix64(np.asarray(keys, dtype=np.uint64) ^ _SLOTS[slot])
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(keys, slot: int = SLOT_NORMAL):
    return ndtri(uniforms(keys, slot))


def exponentials(keys, slot: int = SLOT_LIFE, rate: float = 1.0):
    return -np.log(uniforms(keys, slot)) / rate


def tag_hash(tag: str) -> int:
    return zlib.crc32(tag.encode()) * 0x9E3779B1 & _MASK


def replica_key(seed: int, index: int, tag: str = "bbm") -> int:
    """Root key of replica ``index`` for a given root seed and purpose tag."""
    base = int(mix64(np.uint64((seed ^ tag_hash(tag)) & _MASK)))
    with np.errstate(over="ignore"):
        k = np.uint64(base) + np.uint64(index + 1) * GOLDEN
    return int(mix64(k))


def replica_keys(seed: int, indices, tag: str = "bbm") -> np.ndarray:
    indices = np.asarray(indices, dtype=np.uint64)
    base = mix64(np.uint64((seed ^ tag_hash(tag)) & _MASK))
    with np.errstate(over="ignore"):
        return mix64(base + (indices + np.uint64(1)) * GOLDEN)


def as_key(rng) -> int:
    """Accept an integer key or a ``numpy.random.Generator``."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**64, dtype=np.uint64))
    if isinstance(rng, (int, np.integer)):
        return int(rng) & _MASK
    raise TypeError(f"expected an int key or numpy Generator, got {type(rng).__name__}")
