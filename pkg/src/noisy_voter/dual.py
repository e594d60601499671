"""Coalescing random walks with two stubborn vertices.

A dual particle started at ``x`` walks with the stubborn kernel: it follows
``qP`` inside V and is absorbed at ZERO or ONE with probability ``p/2`` each.
Particles that land on the same vertex of V merge for good. The absorption
labels ``B(x)`` of the particles started at every vertex form an exact draw
from the stationary law of the noisy voter chain.

Two clocks are offered. The discrete dual picks a uniform vertex per step and
moves whatever class sits there. The continuous dual gives each class a rate
``1/(1-p)`` clock (rate 1 for moves, ``p/(1-p)`` for absorption). Both have the
same embedded jump chain: a uniformly chosen live class makes a stubborn-kernel
move. The simulators below advance that jump chain directly and draw the
elapsed time in one shot (geometric or exponential), so no step is wasted on
empty vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numba
import numpy as np
import scipy.sparse as sp

from ._jit import find, pick_next, randbelow
from .forward import NvmParams, OpinionConfig
from .graphs import edge_measure
from .stats import Estimate

STEP_CAP = 10**9


class AbsorptionCapError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class StubbornKernel:
    """The augmented kernel on ``V + {ZERO, ONE}`` (indices ``n`` and ``n+1``)."""

    matrix: sp.csr_matrix
    n: int

    @property
    def zero(self) -> int:
        return self.n

    @property
    def one(self) -> int:
        return self.n + 1

    @classmethod
    def from_params(cls, params: NvmParams) -> "StubbornKernel":
        n = params.n
        P = params.kernel.matrix()
        half = np.full((n, 1), params.p / 2)
        top = sp.hstack([params.q * P, sp.csr_matrix(half), sp.csr_matrix(half)])
        bottom = sp.csr_matrix(([1.0, 1.0], ([0, 1], [n, n + 1])), shape=(2, n + 2))
        M = sp.vstack([top, bottom]).tocsr()
        M.eliminate_zeros()
        return cls(M, n)

    def row(self, z: int):
        lo, hi = self.matrix.indptr[z], self.matrix.indptr[z + 1]
        return self.matrix.indices[lo:hi], self.matrix.data[lo:hi]

    def check(self, tol: float = 1e-12):
        rows = np.asarray(self.matrix.sum(axis=1)).ravel()
        if np.abs(rows - 1).max() > tol:
            raise ValueError("stubborn kernel rows do not sum to 1")
        if self.matrix.data.min() < 0:
            raise ValueError("negative entry in stubborn kernel")


@dataclass
class DualState:
    """Reference (pure Python) discrete dual with one particle per vertex.

    ``position[i]`` is the location of the particle started at ``i``: a vertex
    of V, or ``n`` (ZERO) / ``n + 1`` (ONE) once absorbed.
    """

    position: np.ndarray
    parent: np.ndarray
    clock: int = 0
    merges: list = field(default_factory=list)

    @classmethod
    def start(cls, n: int) -> "DualState":
        return cls(np.arange(n), np.arange(n))

    @property
    def n(self) -> int:
        return len(self.position)

    def root(self, i: int) -> int:
        while self.parent[i] != i:
            i = self.parent[i]
        return i

    def absorbed(self) -> np.ndarray:
        return self.position >= self.n

    def done(self) -> bool:
        return bool(self.absorbed().all())

    def labels(self) -> np.ndarray:
        """``B`` as a 0/1 vector; raises if some particle is still in V."""
        if not self.done():
            raise ValueError("dual not fully absorbed")
        return (self.position == self.n + 1).astype(np.uint8)


def dual_step(state: DualState, stubborn: StubbornKernel, rng) -> DualState:
    """One discrete-dual step: all particles at a uniform vertex move together."""
    n = state.n
    v = int(rng.integers(n))
    state.clock += 1
    here = np.flatnonzero(state.position == v)
    if len(here) == 0:
        return state
    cols, probs = stubborn.row(v)
    z = int(cols[np.searchsorted(np.cumsum(probs), rng.random(), side="right").clip(max=len(cols) - 1)])
    there = np.flatnonzero(state.position == z) if z < n else ()
    state.position[here] = z
    if len(there):
        a, b = state.root(int(here[0])), state.root(int(there[0]))
        if a != b:
            state.parent[a] = b
            state.merges.append((a, b, state.clock))
    return state


def run_reference(params: NvmParams, rng, cap: int = 10**7) -> DualState:
    """Run the reference dual until every particle is absorbed."""
    params.require_stationary()
    stubborn = StubbornKernel.from_params(params)
    state = DualState.start(params.n)
    while not state.done():
        if state.clock >= cap:
            raise AbsorptionCapError(f"reference dual exceeded {cap} steps")
        dual_step(state, stubborn, rng)
    return state


@numba.njit(cache=True, nogil=True)
def _elapsed(m, n, p, continuous, rng):
    # time until the next move of one of m live classes
    if continuous:
        return rng.exponential() * (1.0 - p) / m
    if m == n:
        return 1.0
    return math.floor(math.log(1.0 - rng.random()) / math.log1p(-m / n)) + 1.0


@numba.njit(cache=True, nogil=True)
def _dual_full(indptr, indices, cum, uniform_rows, p, continuous, timed, cap, rng, B, parent):
    n = B.shape[0]
    occ = np.empty(n, np.int64)  # root of the class at each vertex, -1 if empty
    live = np.empty(n, np.int64)  # vertices holding a live class
    label = np.zeros(n, np.uint8)
    for i in range(n):
        occ[i] = i
        live[i] = i
        parent[i] = i
    m = n
    clock = 0.0
    moves = 0
    half = 0.5 * p
    while m > 1:
        if moves >= cap:
            return clock, -1
        if timed:
            clock += _elapsed(m, n, p, continuous, rng)
        moves += 1
        slot = randbelow(rng, m)
        v = live[slot]
        r = occ[v]
        u = rng.random()
        if u < p:
            label[r] = 1 if u < half else 0
            occ[v] = -1
            m -= 1
            last = live[m]
            live[slot] = last
            continue
        y = pick_next(indptr, indices, cum, uniform_rows, v, rng)
        if y == v:
            continue
        occ[v] = -1
        if occ[y] >= 0:
            parent[r] = occ[y]
            m -= 1
            last = live[m]
            live[slot] = last
        else:
            occ[y] = r
            live[slot] = y
    # the lone survivor is absorbed after one more waiting time
    if m == 1:
        r = occ[live[0]]
        if not timed:
            pass
        elif continuous:
            clock += rng.exponential() * (1.0 - p) / p
        else:
            clock += math.floor(math.log(1.0 - rng.random()) / math.log1p(-p / n)) + 1.0
        label[r] = 1 if rng.random() < 0.5 else 0
    for i in range(n):
        B[i] = label[find(parent, i)]
    return clock, moves


@numba.njit(cache=True, nogil=True)
def _sample_many(reps, pi, src, dst, mu, indptr, indices, cum, uniform_rows, p, continuous, timed, with_psi, cap, rng, S, Psi):
    n = pi.shape[0]
    B = np.empty(n, np.uint8)
    parent = np.empty(n, np.int64)
    for r in range(reps):
        _, moves = _dual_full(indptr, indices, cum, uniform_rows, p, continuous, timed, cap, rng, B, parent)
        if moves < 0:
            return r
        s = 0.0
        for i in range(n):
            if B[i]:
                s += pi[i]
        S[r] = s
        if not with_psi:
            continue
        w = 0.0
        for e in range(src.shape[0]):
            if B[src[e]] != B[dst[e]]:
                w += mu[e]
        Psi[r] = w
    return reps


@numba.njit(cache=True, nogil=True)
def _bits_many(reps, indptr, indices, cum, uniform_rows, p, continuous, timed, cap, rng, out):
    n = out.shape[1]
    parent = np.empty(n, np.int64)
    B = np.empty(n, np.uint8)
    for r in range(reps):
        _, moves = _dual_full(indptr, indices, cum, uniform_rows, p, continuous, timed, cap, rng, B, parent)
        if moves < 0:
            return r
        out[r, :] = B
    return reps


def _kernel_args(params):
    k = params.kernel
    return k.indptr, k.indices, k.cum, k.uniform_rows


def sample_stationary(params: NvmParams, rng, continuous: bool = False, cap: int = STEP_CAP) -> OpinionConfig:
    """One exact draw from the stationary law via the full dual.

    Parameters
    ----------
    params : NvmParams
        Model; needs ``p > 0``.
    rng : numpy.random.Generator
    continuous : bool
        Use the continuous-time clock instead of the discrete one. The law of
        the returned configuration is the same.
    cap : int
        Maximum number of class moves before giving up.

    Returns
    -------
    OpinionConfig
        The absorption labels ``B``.
    """
    params.require_stationary()
    B = np.empty(params.n, np.uint8)
    parent = np.empty(params.n, np.int64)
    _, moves = _dual_full(*_kernel_args(params), params.p, continuous, True, cap, rng, B, parent)
    if moves < 0:
        raise AbsorptionCapError(f"dual did not absorb within {cap} moves (n={params.n}, p={params.p:g})")
    return OpinionConfig(B)


def absorption_clock(params: NvmParams, rng, continuous: bool = False) -> float:
    """Time at which the last dual particle is absorbed (one trajectory)."""
    params.require_stationary()
    B = np.empty(params.n, np.uint8)
    parent = np.empty(params.n, np.int64)
    clock, moves = _dual_full(*_kernel_args(params), params.p, continuous, True, STEP_CAP, rng, B, parent)
    if moves < 0:
        raise AbsorptionCapError("dual did not absorb within the step cap")
    return clock


def sample_many(params: NvmParams, reps: int, rng, continuous: bool = False, timed: bool = True,
                cap: int = STEP_CAP) -> np.ndarray:
    """``(reps, n)`` uint8 array of independent stationary configurations.

    With ``timed=False`` the waiting times are not drawn at all; the labels
    only depend on the jump chain, so their law is unchanged.
    """
    params.require_stationary()
    out = np.empty((reps, params.n), np.uint8)
    done = _bits_many(reps, *_kernel_args(params), params.p, continuous, timed, cap, rng, out)
    if done < reps:
        raise AbsorptionCapError(f"dual did not absorb within {cap} moves")
    return out


def sample_S(params: NvmParams, reps: int, rng, continuous: bool = False, with_psi: bool = False,
             timed: bool = True, cap: int = STEP_CAP):
    """``reps`` stationary draws of ``S`` (and of ``Psi`` if ``with_psi``)."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    params.require_stationary()
    k = params.kernel
    em = edge_measure(k)
    S = np.empty(reps)
    Psi = np.zeros(reps)
    done = _sample_many(reps, k.pi, em.src, em.dst, em.mu, *_kernel_args(params), params.p, continuous, timed, with_psi, cap, rng, S, Psi)
    if done < reps:
        raise AbsorptionCapError(f"dual did not absorb within {cap} moves")
    return (S, Psi) if with_psi else S


@numba.njit(cache=True, nogil=True)
def _pair_meets(x, y, indptr, indices, cum, uniform_rows, p, rng):
    # one trajectory of two independent particles until meeting or absorption
    while True:
        if rng.random() < p:
            return False
        if rng.random() < 0.5:
            x = pick_next(indptr, indices, cum, uniform_rows, x, rng)
        else:
            y = pick_next(indptr, indices, cum, uniform_rows, y, rng)
        if x == y:
            return True


@numba.njit(cache=True, nogil=True)
def _pair_many(xs, ys, indptr, indices, cum, uniform_rows, p, rng):
    hits = 0
    for r in range(xs.shape[0]):
        if xs[r] == ys[r] or _pair_meets(xs[r], ys[r], indptr, indices, cum, uniform_rows, p, rng):
            hits += 1
    return hits


def meet_before_absorption(params: NvmParams, x: int, y: int, reps: int, rng) -> Estimate:
    """Frequency of the event that particles from ``x`` and ``y`` meet in V
    before either is absorbed.

    Runs only two particles in continuous time. Between events each moves at
    rate 1 and the pair is absorbed at total rate ``2p/(1-p)``, so every event
    is an absorption with probability ``p`` and otherwise a move of a uniformly
    chosen particle.
    """
    params.require_stationary()
    n = params.n
    if not (0 <= x < n and 0 <= y < n):
        raise IndexError("vertex out of range")
    if x == y:
        return Estimate(1.0, 0.0, reps)
    if params.p >= 1.0:
        return Estimate(0.0, 0.0, reps)
    xs = np.full(reps, x, np.int64)
    ys = np.full(reps, y, np.int64)
    hits = _pair_many(xs, ys, *_kernel_args(params), params.p, rng)
    return Estimate.from_counts(int(hits), reps)


def sigma_sq_via_dual(params: NvmParams, reps: int, rng) -> Estimate:
    """Estimate ``Var(S)`` from ``(1/4) sum_xy pi(x) pi(y) P(E_xy)``.

    Each replicate draws ``(x, y)`` from ``pi x pi`` and runs one pair
    trajectory; the estimate is a quarter of the hit frequency.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    params.require_stationary()
    pi = params.kernel.pi
    n = params.n
    xs = rng.choice(n, size=reps, p=pi).astype(np.int64)
    ys = rng.choice(n, size=reps, p=pi).astype(np.int64)
    if params.p >= 1.0:
        hits = int(np.count_nonzero(xs == ys))
    else:
        hits = int(_pair_many(xs, ys, *_kernel_args(params), params.p, rng))
    return Estimate.from_counts(hits, reps).scale(0.25)


@numba.njit(cache=True, nogil=True)
def _k_particle(starts, indptr, indices, cum, uniform_rows, p, rng, met):
    # coalescing particles from `starts`; met[i, j] set when i and j merge in V
    k = starts.shape[0]
    parent = np.arange(k)
    pos = starts.copy()
    live = np.arange(k)  # roots of live classes
    m = k
    for i in range(k):
        for j in range(k):
            met[i, j] = False
    while m > 1:
        slot = randbelow(rng, m)
        r = live[slot]
        if rng.random() < p:
            m -= 1
            live[slot] = live[m]
            continue
        y = pick_next(indptr, indices, cum, uniform_rows, pos[r], rng)
        pos[r] = y
        for t in range(m):
            other = live[t]
            if t != slot and pos[other] == y:
                for i in range(k):
                    if find(parent, i) == r:
                        for j in range(k):
                            if find(parent, j) == other:
                                met[i, j] = True
                                met[j, i] = True
                parent[r] = other
                m -= 1
                live[slot] = live[m]
                break


@numba.njit(cache=True, nogil=True)
def _k_particle_many(starts, reps, indptr, indices, cum, uniform_rows, p, rng, counts):
    k = starts.shape[0]
    met = np.zeros((k, k), np.bool_)
    for _ in range(reps):
        _k_particle(starts, indptr, indices, cum, uniform_rows, p, rng, met)
        for i in range(k):
            for j in range(k):
                if met[i, j]:
                    counts[i, j] += 1


@dataclass(frozen=True)
class OrderingFrequencies:
    """Meeting-before-absorption frequencies for the pairs (x,y), (x,v), (u,v), (u,y)."""

    xy: Estimate
    xv: Estimate
    uv: Estimate
    uy: Estimate

    def total(self) -> Estimate:
        parts = (self.xy, self.xv, self.uv, self.uy)
        # the four indicators are correlated; bound the SE of the sum by the sum of SEs
        return Estimate(sum(e.value for e in parts), sum(e.se for e in parts), self.xy.reps)

    def as_tuple(self):
        return self.xy, self.xv, self.uv, self.uy


def four_particle_orderings(params: NvmParams, quad, reps: int, rng) -> OrderingFrequencies:
    """Run four coalescing dual particles from ``quad = (x, u, v, y)``.

    Returns the frequencies with which each of the pairs (x,y), (x,v), (u,v),
    (u,y) meets in V before either member is absorbed.
    """
    params.require_stationary()
    x, u, v, y = (int(a) for a in quad)
    if len({x, u, v, y}) != 4:
        raise ValueError("the four starting vertices must be distinct")
    if max(x, u, v, y) >= params.n or min(x, u, v, y) < 0:
        raise IndexError("vertex out of range")
    starts = np.array([x, u, v, y], np.int64)
    counts = np.zeros((4, 4), np.int64)
    if params.p < 1.0:
        _k_particle_many(starts, reps, *_kernel_args(params), params.p, rng, counts)
    idx = {"x": 0, "u": 1, "v": 2, "y": 3}

    def est(a, b):
        return Estimate.from_counts(int(counts[idx[a], idx[b]]), reps)

    return OrderingFrequencies(est("x", "y"), est("x", "v"), est("u", "v"), est("u", "y"))


def pair_meet_matrix(params: NvmParams, starts, reps: int, rng) -> np.ndarray:
    """Frequencies of pairwise meeting-before-absorption among coalescing particles."""
    params.require_stationary()
    starts = np.asarray(starts, np.int64)
    if len(set(starts.tolist())) != len(starts):
        raise ValueError("starting vertices must be distinct")
    counts = np.zeros((len(starts), len(starts)), np.int64)
    if params.p < 1.0:
        _k_particle_many(starts, reps, *_kernel_args(params), params.p, rng, counts)
    out = counts / reps
    np.fill_diagonal(out, 1.0)
    return out


def all_pairs(n: int):
    return list(combinations(range(n), 2))
