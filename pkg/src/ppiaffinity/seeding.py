"""Deterministic derivation of per-component random streams.

All randomness in an experiment flows from one root seed. Each stochastic
component (weight init, batch shuffling, fixture generation) draws from a
named substream so that changing one component's consumption pattern never
perturbs the others.
"""

import hashlib

import numpy as np


def substream_seed(root_seed: int, name: str) -> int:
    """Derive a stable 64-bit seed for the named substream."""
    digest = hashlib.sha256(f"{root_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream_rng(root_seed: int, name: str) -> np.random.Generator:
    """A numpy Generator seeded from the named substream."""
    return np.random.default_rng(substream_seed(root_seed, name))
