"""Deterministic derivation of random streams.

Every stochastic component derives child generators from integer key tuples,
so reruns, reordered chunks, and concurrent workers see identical draws.
"""

import numpy as np

_MASK = (1 << 64) - 1


def child_rng(*keys):
    """Generator keyed by an order-sensitive tuple of integers."""
    return np.random.default_rng([int(k) & _MASK for k in keys])


def as_keys(seed):
    """Normalize an int or tuple-of-ints seed into a key tuple."""
    if isinstance(seed, (tuple, list)):
        return tuple(int(k) for k in seed)
    return (int(seed),)
