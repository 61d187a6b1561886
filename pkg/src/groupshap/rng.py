"""Deterministic seed derivation.

Every random draw in the package comes from a stream named by a tuple of
non-negative integers (master seed, purpose tag, ...). Monte Carlo draws for
one coalition use a Philox generator keyed by (instance key, coalition mask),
so a coalition's estimate does not depend on which other coalitions were
evaluated before it, in which order, or on which thread.
"""

from __future__ import annotations

import os

import numpy as np

# purpose tags
DATA = 1
STANDARDIZE = 2
MONTE_CARLO = 3
IDENTITIES = 4
SYNTHETIC = 5

SEED_ENV = "GSHAP_SEED"
DEFAULT_SEED = 2021


def default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else DEFAULT_SEED


def _check(keys):
    keys = tuple(int(k) for k in keys)
    if any(k < 0 for k in keys):
        raise ValueError(f"stream keys must be non-negative, got {keys}")
    return keys


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the named stream."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_check(keys))
    return np.random.Generator(np.random.PCG64(ss))


def stream_key(seed: int, *keys: int) -> int:
    """64-bit key summarising a stream name, used to key coalition streams."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_check(keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def coalition_stream(key: int, mask: int) -> np.random.Generator:
    """Generator dedicated to one coalition of one explained instance."""
    k = np.array([key, mask], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=k))
