"""Counter-based random streams keyed by (seed, path).

A stream depends only on the seed and its key, never on how work is split
across workers, so parallel runs reproduce serial ones bit for bit.
"""
import numpy as np


def stream(seed, key=()):
    key = tuple(int(k) for k in np.atleast_1d(key)) if not isinstance(key, tuple) else key
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))
