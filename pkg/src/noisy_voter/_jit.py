"""Numba helpers shared by the simulation kernels."""

import numba


@numba.njit(cache=True, nogil=True, inline="always")
def randbelow(rng, m):
    """Uniform integer in ``[0, m)`` from one double (bias below m / 2**53).

    Much cheaper than ``Generator.integers`` inside compiled code.
    """
    i = int(rng.random() * m)
    return i if i < m else m - 1


@numba.njit(cache=True, nogil=True)
def pick_next(indptr, indices, cum, uniform_rows, x, rng):
    """Sample ``y ~ P(x, .)`` from a CSR kernel."""
    lo = indptr[x]
    hi = indptr[x + 1]
    if uniform_rows:
        return indices[lo + randbelow(rng, hi - lo)]
    u = rng.random()
    for j in range(lo, hi - 1):
        if u < cum[j]:
            return indices[j]
    return indices[hi - 1]


@numba.njit(cache=True, nogil=True)
def find(parent, i):
    """Union-find root with path halving."""
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i
