"""Forward discrete-time noisy voter chain on {0,1}^V."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ._jit import pick_next, randbelow
from .graphs import TransitionKernel, kernel_from_matrix
from .streams import stream


class ParameterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NvmParams:
    """The model NVM(V, P, p): a kernel plus the noise probability ``p``.

    ``p = 0`` (plain voter model) is only accepted with ``consensus_demo=True``;
    such parameters can be run forward but have no unique stationary law.
    """

    kernel: TransitionKernel
    p: float
    consensus_demo: bool = False

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p > 1.0 or p < 0.0:
            raise ParameterError(f"noise probability p must lie in (0, 1], got {self.p!r}")
        if p == 0.0 and not self.consensus_demo:
            raise ParameterError(
                "p = 0 has no unique stationary law; use NvmParams.voter_model() for a consensus demo"
            )
        object.__setattr__(self, "p", p)

    @classmethod
    def voter_model(cls, kernel):
        """Noise-free voter model, for watching consensus form."""
        return cls(kernel, 0.0, consensus_demo=True)

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def n(self) -> int:
        return self.kernel.n

    def require_stationary(self):
        if self.p <= 0.0:
            raise ParameterError("this operation needs p > 0 (unique stationary law)")

    def __repr__(self):
        return f"NvmParams({self.kernel.label}, p={self.p:g})"


class OpinionConfig:
    """A configuration ``xi in {0,1}^V`` stored one byte per vertex."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        bits = np.asarray(bits)
        if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
            raise ValueError("opinions must be a 1-d 0/1 vector")
        self.bits = bits.astype(np.uint8)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n, np.uint8))

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n, np.uint8))

    @classmethod
    def random(cls, n, rng):
        return cls(rng.integers(0, 2, size=n, dtype=np.uint8))

    @classmethod
    def from_int(cls, code: int, n: int):
        return cls((code >> np.arange(n)) & 1)

    def to_int(self) -> int:
        return int(np.dot(self.bits.astype(np.int64), 1 << np.arange(len(self.bits), dtype=np.int64)))

    @property
    def n(self):
        return len(self.bits)

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    def s(self, pi) -> float:
        """Stationary-weighted fraction ``S = sum_x pi(x) xi(x)``."""
        return float(np.dot(pi, self.bits))

    def hamming(self, other) -> int:
        return int(np.count_nonzero(self.bits != other.bits))

    def __eq__(self, other):
        return isinstance(other, OpinionConfig) and np.array_equal(self.bits, other.bits)

    def __len__(self):
        return len(self.bits)

    def __repr__(self):
        return "OpinionConfig(" + "".join(map(str, self.bits)) + ")"


def _check(cfg, params):
    if len(cfg) != params.n:
        raise ValueError(f"configuration has length {len(cfg)}, kernel has n={params.n}")


def step(cfg: OpinionConfig, params: NvmParams, rng) -> OpinionConfig:
    """One transition: a uniform vertex re-randomises with probability ``p``,
    otherwise copies the opinion of ``y ~ P(x, .)``."""
    _check(cfg, params)
    k = params.kernel
    x = int(rng.integers(k.n))
    bits = cfg.bits.copy()
    if rng.random() < params.p:
        bits[x] = rng.integers(0, 2)
    else:
        y = pick_next(k.indptr, k.indices, k.cum, k.uniform_rows, x, rng)
        bits[x] = bits[y]
    return OpinionConfig(bits)


def flip_probability(cfg: OpinionConfig, x: int, params: NvmParams) -> float:
    """``Q(xi, xi^x)``: probability that exactly vertex ``x`` flips in one step."""
    k = params.kernel
    nbrs, probs = k.row(x)
    ones = float(np.dot(probs, cfg.bits[nbrs]))
    agree_target = ones if cfg.bits[x] == 0 else 1.0 - ones
    return params.p / (2 * k.n) + params.q / k.n * agree_target


def transition_prob(cfg: OpinionConfig, cfg2: OpinionConfig, params: NvmParams) -> float:
    """Entry ``Q(cfg, cfg2)`` of the chain's transition matrix."""
    if len(cfg) != len(cfg2):
        raise ValueError("configurations differ in length")
    _check(cfg, params)
    diff = np.flatnonzero(cfg.bits != cfg2.bits)
    if len(diff) >= 2:
        return 0.0
    if len(diff) == 1:
        return flip_probability(cfg, int(diff[0]), params)
    return 1.0 - sum(flip_probability(cfg, x, params) for x in range(params.n))


@numba.njit(cache=True, nogil=True)
def _run(bits, s, pi, indptr, indices, cum, uniform_rows, p, t, rng):
    n = bits.shape[0]
    half = 0.5 * p
    for _ in range(t):
        x = randbelow(rng, n)
        u = rng.random()
        if u < p:
            new = 1 if u < half else 0
        else:
            new = bits[pick_next(indptr, indices, cum, uniform_rows, x, rng)]
        if new != bits[x]:
            bits[x] = new
            if new:
                s += pi[x]
            else:
                s -= pi[x]
    return s


def run(params: NvmParams, t: int, init: OpinionConfig, rng) -> OpinionConfig:
    """Iterate ``t`` steps from ``init``; deterministic given the generator state."""
    if t < 0:
        raise ValueError("step count must be non-negative")
    _check(init, params)
    k = params.kernel
    bits = init.bits.copy()
    _run(bits, init.s(k.pi), k.pi, k.indptr, k.indices, k.cum, k.uniform_rows, params.p, int(t), rng)
    return OpinionConfig(bits)


def burn_in(params: NvmParams, factor: float = 8.0) -> int:
    """Default burn-in ``ceil(factor * n log n / p)`` for forward stationary sampling."""
    params.require_stationary()
    n = params.n
    return int(math.ceil(factor * n * math.log(n) / params.p))


def run_replicas(params: NvmParams, steps: int, seed: int, replicas: int, init=None):
    """Run ``replicas`` independent chains; replica ``r`` uses stream ``(seed, r)``.

    Returns arrays ``(S, popcount)`` of the final states. Without ``init`` each
    replica starts from an i.i.d. fair-coin configuration drawn from its stream.
    """
    k = params.kernel
    S = np.empty(replicas)
    pop = np.empty(replicas, dtype=np.int64)
    for r in range(replicas):
        rng = stream(seed, r)
        bits = (init.bits.copy() if init is not None
                else rng.integers(0, 2, size=k.n, dtype=np.uint8))
        s0 = float(np.dot(k.pi, bits))
        S[r] = _run(bits, s0, k.pi, k.indptr, k.indices, k.cum, k.uniform_rows, params.p, int(steps), rng)
        pop[r] = bits.sum()
    return S, pop


def from_rates(R, delta: float) -> NvmParams:
    """Uniformise a continuous-time voter model with noise rate ``delta``.

    ``P = I + R / r_max`` and ``p = delta / (r_max + delta)``, where ``r_max``
    is the largest total exit rate.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("rate matrix must be square")
    off = R - np.diag(np.diag(R))
    if (off < 0).any() or np.abs(R.sum(axis=1)).max() > 1e-12 * max(1.0, np.abs(R).max()):
        raise ValueError("rate matrix needs non-negative off-diagonals and zero row sums")
    if delta <= 0:
        raise ValueError("noise rate delta must be positive")
    r_max = float(np.abs(np.diag(R)).max())
    if r_max == 0.0:
        raise ValueError("rate matrix has no transitions (r_max = 0)")
    P = np.eye(len(R)) + R / r_max
    P[np.abs(P) < 1e-15] = 0.0
    kernel = kernel_from_matrix(P, label="uniformised")
    return NvmParams(kernel, delta / (r_max + delta))
