"""Independent random walks: hitting and meeting times, the killed gambler's
ruin on a segment, and Monte Carlo checks of two walk identities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._jit import pick_next
from .graphs import TransitionKernel
from .stats import Estimate

EXACT_HIT_MAX_N = 2000
SAMPLED_TARGETS = 32


@dataclass(frozen=True)
class Theta:
    """``theta(p) = (1 - sqrt(p(2-p))) / (1-p)``, the smaller root of
    ``theta + 1/theta = 2/(1-p)``; ``theta(1) = 0`` by continuity."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")

    @property
    def theta(self) -> float:
        a = 1.0 - self.p
        # a / (1 + sqrt(1 - a^2)) avoids the cancellation near p = 0
        return a / (1.0 + math.sqrt(self.p * (2.0 - self.p)))

    @property
    def one_minus(self) -> float:
        r = math.sqrt(self.p * (2.0 - self.p))
        return (self.p + r) / (1.0 + r)

    def identity_residual(self) -> float:
        """``|theta + 1/theta - 2/(1-p)|``, relative to ``2/(1-p)``."""
        if self.p >= 1.0:
            return 0.0
        t = self.theta
        target = 2.0 / (1.0 - self.p)
        return abs(t + 1.0 / t - target) / target


def theta(p: float) -> float:
    return Theta(p).theta


def gambler_gf(k: int, n: int, p: float) -> float:
    """``E_k[(1-p)^T]`` with ``T`` the exit time of simple walk on Z from ``{1..n-1}``.

    Equivalently the chance that the walk from ``k`` reaches 0 or ``n`` before
    an independent Geometric(p) killing clock rings.
    """
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    th = theta(p)
    if th == 0.0:
        return 1.0 if k in (0, n) else 0.0
    return (th**k + th ** (n - k)) / (1.0 + th**n)


@numba.njit(cache=True, nogil=True)
def _killed_walk_hits(k, n, p, reps, rng):
    hits = 0
    for _ in range(reps):
        x = k
        while 0 < x < n:
            if rng.random() < p:
                break
            x += 1 if rng.random() < 0.5 else -1
        if x == 0 or x == n:
            hits += 1
    return hits


def gambler_mc(k: int, n: int, p: float, reps: int, rng) -> Estimate:
    """Direct simulation of the killed walk: each step first survives with
    probability ``1-p``, then moves +-1."""
    return Estimate.from_counts(int(_killed_walk_hits(k, n, p, reps, rng)), reps)


def _hit_solve(P: sp.csr_matrix, y: int) -> np.ndarray:
    # (I - P restricted to V \ {y}) h = 1
    n = P.shape[0]
    keep = np.r_[0:y, y + 1:n]
    A = sp.identity(n - 1, format="csc") - P[keep][:, keep].tocsc()
    h = spla.splu(A, permc_spec="MMD_AT_PLUS_A").solve(np.ones(n - 1))
    resid = np.abs(A @ h - 1.0).max()
    if resid >= 1e-8:
        raise ArithmeticError(f"hitting-time solve residual {resid:.2e} exceeds 1e-8")
    out = np.zeros(n)
    out[keep] = h
    return out


def hitting_times_to(kernel: TransitionKernel, y: int) -> np.ndarray:
    """``E_x[T_y]`` for every start ``x`` (discrete time)."""
    return _hit_solve(kernel.matrix(), y)


@dataclass(frozen=True)
class HittingTime:
    value: float
    exact: bool
    targets: int


def hitting_time(kernel: TransitionKernel, rng=None, exact_max_n: int = EXACT_HIT_MAX_N) -> HittingTime:
    """``t_hit = max_{x,y} E_x[T_y]`` for the discrete walk.

    Exact for transitive kernels (one target) and for ``n <= exact_max_n``
    (every target). Larger non-transitive kernels get a lower bound from a
    random subset of targets, which needs ``rng``.
    """
    P = kernel.matrix()
    n = kernel.n
    if kernel.transitive:
        targets = [0]
    elif n <= exact_max_n:
        targets = range(n)
    else:
        if rng is None:
            raise ValueError("a generator is needed for the sampled-target estimate")
        targets = rng.choice(n, size=SAMPLED_TARGETS, replace=False)
    best = max(_hit_solve(P, int(y)).max() for y in targets)
    exact = kernel.transitive or n <= exact_max_n
    return HittingTime(float(best), exact, len(targets))


@numba.njit(cache=True, nogil=True)
def _meeting_times(xs, ys, indptr, indices, cum, uniform_rows, t_cap, rng, out):
    # continuous time, two rate-1 walkers; meeting checked after each jump
    for r in range(xs.shape[0]):
        x = xs[r]
        y = ys[r]
        t = 0.0
        while x != y and t <= t_cap:
            t += 0.5 * rng.exponential()
            if rng.random() < 0.5:
                x = pick_next(indptr, indices, cum, uniform_rows, x, rng)
            else:
                y = pick_next(indptr, indices, cum, uniform_rows, y, rng)
        out[r] = t if x == y else np.inf


def meeting_times(kernel: TransitionKernel, reps: int, rng, t_cap: float = np.inf) -> np.ndarray:
    """Meeting times of two independent rate-1 walks started i.i.d. from ``pi``.

    Trajectories still apart after ``t_cap`` report ``inf``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    xs = rng.choice(kernel.n, size=reps, p=kernel.pi).astype(np.int64)
    ys = rng.choice(kernel.n, size=reps, p=kernel.pi).astype(np.int64)
    out = np.empty(reps)
    _meeting_times(xs, ys, kernel.indptr, kernel.indices, kernel.cum, kernel.uniform_rows, float(t_cap), rng, out)
    return out


def meeting_time(kernel: TransitionKernel, reps: int, rng) -> Estimate:
    """``t_meet = E[M]`` under ``pi x pi`` starts."""
    return Estimate.from_samples(meeting_times(kernel, reps, rng))


@dataclass(frozen=True)
class TailRow:
    t: float
    estimate: float
    se: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.estimate <= self.bound + 3 * self.se

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0


def meeting_tail_check(kernel: TransitionKernel, t_hit: float, multiples, reps: int, rng) -> list[TailRow]:
    """Compare ``P(M > t)`` with ``exp(-t / t_hit)`` at ``t = c * t_hit``."""
    ts = [c * t_hit for c in multiples]
    m = meeting_times(kernel, reps, rng, t_cap=max(ts))
    rows = []
    for t in ts:
        f = float(np.mean(m > t))
        rows.append(TailRow(t, f, math.sqrt(f * (1 - f) / reps), math.exp(-t / t_hit)))
    return rows


def torus_meet_tail_check(kernel: TransitionKernel, ts, reps: int, rng) -> list[TailRow]:
    """Compare ``P(M <= t)`` with ``(2t+1) nu^2`` on a 2-d torus.

    At ``t = 0`` the estimate is replaced by the exact ``P(X_0 = Y_0) = nu^2``.
    """
    if kernel.family != "torus" or len(kernel.dims) != 2:
        raise ValueError("torus tail check needs a 2-d torus kernel")
    ts = [float(t) for t in ts]
    m = meeting_times(kernel, reps, rng, t_cap=max(ts))
    nu_sq = kernel.nu_sq
    rows = []
    for t in ts:
        if t == 0.0:
            rows.append(TailRow(0.0, nu_sq, 0.0, nu_sq))
            continue
        f = float(np.mean(m <= t))
        rows.append(TailRow(t, f, math.sqrt(f * (1 - f) / reps), (2 * t + 1) * nu_sq))
    return rows


@numba.njit(cache=True, nogil=True)
def _htt_counts(k, t_max, reps, rng, first_hit, at_zero):
    for _ in range(reps):
        x = k
        hit = False
        for t in range(1, t_max + 1):
            x += 1 if rng.random() < 0.5 else -1
            if x == 0:
                at_zero[t] += 1
                if not hit:
                    first_hit[t] += 1
                    hit = True


@dataclass(frozen=True)
class HttReport:
    """Per-time comparison of ``P(T_0 = t)`` with ``(k/t) P(X_t = 0)``."""

    k: int
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    se: np.ndarray = field(repr=False)

    @property
    def max_deviation(self) -> float:
        return float(np.abs(self.lhs - self.rhs).max())

    @property
    def max_z(self) -> float:
        dev = np.abs(self.lhs - self.rhs)
        z = np.where(self.se > 0, dev / np.where(self.se > 0, self.se, 1.0), np.where(dev > 0, np.inf, 0.0))
        return float(z.max())


def hitting_time_theorem_check(k: int, t_max: int, reps: int, rng) -> HttReport:
    """Simulate simple walk on Z from ``k`` and estimate both sides of
    ``P(T_0 = t) = (k/t) P(X_t = 0)`` for ``t = 1..t_max`` from the same paths."""
    if k < 1:
        raise ValueError("k must be at least 1")
    first = np.zeros(t_max + 1, np.int64)
    zero = np.zeros(t_max + 1, np.int64)
    _htt_counts(k, t_max, reps, rng, first, zero)
    t = np.arange(1, t_max + 1)
    a = first[1:] / reps
    b = zero[1:] / reps
    rhs = k / t * b
    se = np.sqrt(a * (1 - a) / reps + (k / t) ** 2 * b * (1 - b) / reps)
    return HttReport(k, t, a, rhs, se)


class WalkEnsemble:
    """``m`` independent walks on a kernel that never interact.

    In discrete mode every walker takes one step per call; in continuous mode
    one uniformly chosen walker jumps and the clock advances by an
    Exp(m) waiting time.
    """

    def __init__(self, kernel: TransitionKernel, positions, continuous: bool = False):
        self.kernel = kernel
        self.positions = np.asarray(positions, dtype=np.int64).copy()
        self.continuous = continuous
        self.clock = 0.0

    @property
    def m(self) -> int:
        return len(self.positions)

    def _move(self, x, rng):
        k = self.kernel
        return pick_next(k.indptr, k.indices, k.cum, k.uniform_rows, x, rng)

    def step(self, rng):
        if self.continuous:
            i = int(rng.integers(self.m))
            self.clock += rng.exponential() / self.m
            self.positions[i] = self._move(int(self.positions[i]), rng)
        else:
            self.clock += 1
            for i in range(self.m):
                self.positions[i] = self._move(int(self.positions[i]), rng)
        return self
