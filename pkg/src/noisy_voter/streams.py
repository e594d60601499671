"""Seeded, counter-based random streams.

Every stochastic routine takes a :class:`numpy.random.Generator`. Callers that
need reproducibility under parallelism derive one stream per replica (or per
sweep row) from ``(master_seed, index)``; streams are Philox counter-based
generators keyed through :class:`numpy.random.SeedSequence`, so the result
never depends on scheduling.
"""

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(rng)
