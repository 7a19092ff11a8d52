"""Deterministic random-stream derivation.

Every stochastic operation in the package takes an explicit 64-bit seed.
Independent substreams (per trial, per probe, per Monte-Carlo chunk, ...)
are derived from ``(seed, index...)`` through numpy's SeedSequence hashing,
so results are bit-for-bit reproducible regardless of execution order or
worker count.  Normal variates come from numpy's PCG64 bit generator and
its ziggurat transform, whose bit streams are fixed and versioned by
numpy's stream-compatibility policy.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def child_seed(seed: int, *key: int) -> int:
    """Derive an integer seed for substream ``key`` (hash of seed and key)."""
    return int(stream(seed, *key).integers(0, 2 ** 62))
