# rng.py
"""
Counter-based random substreams.

Every random quantity in the package is drawn from a numpy Philox generator
keyed by the user seed plus a tuple of integers naming the work unit
(feature block, study cell, fold split...). Two calls with the same key see the
same stream no matter which thread runs them or in which order.
"""
import numpy as np

SEED_MASK = (1 << 64) - 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream (seed, *key)."""
    if seed < 0:
        raise ValueError(f"seed must be a nonnegative 64-bit integer, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *key: int) -> int:
    """A fresh 64-bit seed for the substream (seed, *key)."""
    sequence = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def as_generator(rng) -> np.random.Generator:
    """Accept either a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(int(rng))
