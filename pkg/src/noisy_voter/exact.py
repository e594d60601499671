"""Brute-force ground truth on small instances.

States are integer bitmasks: bit ``x`` of the code is the opinion of vertex
``x``. The full transition matrix Q has ``n`` single-flip entries plus the
diagonal in each row, so it is assembled sparse and solved directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .forward import NvmParams
from .graphs import edge_measure

log = logging.getLogger(__name__)

DEFAULT_MAX_N = 12
HARD_MAX_N = 14


class OracleSizeError(ValueError):
    pass


def state_bits(n: int) -> np.ndarray:
    """``(2^n, n)`` matrix whose row ``c`` is the bit vector of code ``c``."""
    codes = np.arange(1 << n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def flip_rates(params: NvmParams, bits: np.ndarray | None = None) -> np.ndarray:
    """``(2^n, n)`` array of single-flip probabilities ``Q(xi, xi^x)``."""
    k = params.kernel
    n = k.n
    if bits is None:
        bits = state_bits(n)
    P = k.dense()
    ones = bits @ P.T  # P(x, A) with A the set of 1-vertices
    agree = np.where(bits == 0, ones, 1.0 - ones)
    return params.p / (2 * n) + params.q / n * agree


def build_q(params: NvmParams) -> sp.csr_matrix:
    """Sparse transition matrix of the chain over all ``2^n`` states."""
    n = params.n
    N = 1 << n
    bits = state_bits(n)
    flips = flip_rates(params, bits)
    codes = np.arange(N, dtype=np.int64)
    rows = np.concatenate([np.repeat(codes, 1)] + [codes] * n)
    cols = np.concatenate([codes] + [codes ^ (1 << x) for x in range(n)])
    vals = np.concatenate([1.0 - flips.sum(axis=1)] + [flips[:, x] for x in range(n)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))


def _solve_direct(Q: sp.csr_matrix) -> np.ndarray:
    N = Q.shape[0]
    A = (Q.T - sp.identity(N, format="csr")).tolil()
    A[N - 1, :] = np.ones(N)
    b = np.zeros(N)
    b[-1] = 1.0
    A = A.tocsc()
    # minimum degree on A^T + A keeps fill-in low on hypercube-like structure
    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A")
    g = lu.solve(b)
    g += lu.solve(b - A @ g)  # one refinement step
    return g


def _solve_power(Q: sp.csr_matrix, gap: float, tol=1e-13, max_iter=200_000):
    # a small step change only certifies closeness to Gamma up to a 1/gap factor
    tol = tol * min(1.0, gap)
    N = Q.shape[0]
    g = np.full(N, 1.0 / N)
    QT = Q.T.tocsr()
    for it in range(max_iter):
        g_next = QT @ g
        g_next /= g_next.sum()
        if np.abs(g_next - g).sum() < tol:
            return g_next, it + 1
        g = g_next
    return None, max_iter


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """The stationary law Gamma over all ``2^n`` configurations."""

    params: NvmParams
    gamma: np.ndarray
    residual: float

    @property
    def n(self) -> int:
        return self.params.n

    @cached_property
    def bits(self) -> np.ndarray:
        return state_bits(self.n)

    @cached_property
    def s_values(self) -> np.ndarray:
        return self.bits @ self.params.kernel.pi

    @property
    def mean(self) -> float:
        return float(self.gamma @ self.s_values)

    @property
    def sigma_sq(self) -> float:
        d = self.s_values - 0.5
        return float(self.gamma @ (d * d))

    @cached_property
    def s_pmf(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct achieved values of ``S`` (rounded to 1e-12) and their masses."""
        keys = np.round(self.s_values, 12)
        values, inverse = np.unique(keys, return_inverse=True)
        return values, np.bincount(inverse, weights=self.gamma)

    @cached_property
    def second_moments(self) -> np.ndarray:
        """``E[xi(x) xi(y)]`` for all pairs."""
        B = self.bits.astype(float)
        return B.T @ (B * self.gamma[:, None])

    @property
    def covariance(self) -> np.ndarray:
        m1 = self.gamma @ self.bits
        return self.second_moments - np.outer(m1, m1)

    @property
    def disagreement(self) -> np.ndarray:
        """``P(xi(x) != xi(y))`` for all pairs."""
        m1 = self.gamma @ self.bits
        M = self.second_moments
        return m1[:, None] + m1[None, :] - 2 * M

    def disagree_indicator(self, a: int, b: int) -> np.ndarray:
        return (self.bits[:, a] ^ self.bits[:, b]).astype(float)


def exact_gamma(params: NvmParams, max_n: int = DEFAULT_MAX_N, method: str = "direct") -> ExactDistribution:
    """Solve ``Gamma Q = Gamma`` exactly.

    ``method="direct"`` uses a sparse LU solve with one refinement step;
    ``method="power"`` iterates until the L1 change drops below ``1e-13 * p/n``
    (the chain contracts at rate ``1 - p/n``) and falls back to the direct
    solve if that does not happen.
    """
    params.require_stationary()
    n = params.n
    if n > min(max_n, HARD_MAX_N):
        raise OracleSizeError(f"exact oracle limited to n <= {min(max_n, HARD_MAX_N)}, got n={n}")
    Q = build_q(params)
    g = None
    if method == "power":
        g, iters = _solve_power(Q, params.p / n)
        if g is None:
            log.info("power iteration did not converge in %d steps; using direct solve", iters)
    elif method != "direct":
        raise ValueError(f"unknown method {method!r}")
    if g is None:
        g = _solve_direct(Q)
    if g.min() < -1e-14:
        raise ArithmeticError(f"stationary solve produced a negative mass {g.min():.3e}")
    g = np.clip(g, 0.0, None)
    g /= g.sum()
    residual = float(np.abs(Q.T @ g - g).sum())
    return ExactDistribution(params, g, residual)


def exact_moments(dist: ExactDistribution):
    """``(E(S), Var(S), (values, masses))`` under Gamma."""
    return dist.mean, dist.sigma_sq, dist.s_pmf


def exact_h(dist: ExactDistribution, u: int, v: int, x: int, y: int) -> float:
    """``Cov(1{xi(x) != xi(u)}, 1{xi(y) != xi(v)})`` under Gamma."""
    a = dist.disagree_indicator(x, u)
    b = dist.disagree_indicator(y, v)
    g = dist.gamma
    return float(g @ (a * b) - (g @ a) * (g @ b))


def psi_values(dist: ExactDistribution) -> np.ndarray:
    """``Psi(xi)`` for every state."""
    em = edge_measure(dist.params.kernel)
    bits = dist.bits
    disagree = bits[:, em.src] ^ bits[:, em.dst]
    return disagree @ em.mu


def exact_psi_variance(dist: ExactDistribution) -> float:
    psi = psi_values(dist)
    m = dist.gamma @ psi
    return float(dist.gamma @ (psi - m) ** 2)


def expected_next_s(params: NvmParams, Q: sp.csr_matrix | None = None) -> np.ndarray:
    """``E[S' | xi]`` for every state, read off the rows of Q."""
    if Q is None:
        Q = build_q(params)
    s = state_bits(params.n) @ params.kernel.pi
    return Q @ s


def contraction_residual(params: NvmParams) -> float:
    """``max_xi |E[S' - 1/2 | xi] - (1 - p/n)(S(xi) - 1/2)|``."""
    s = state_bits(params.n) @ params.kernel.pi
    lhs = expected_next_s(params) - 0.5
    rhs = (1.0 - params.p / params.n) * (s - 0.5)
    return float(np.abs(lhs - rhs).max())


def complete_count_law(n: int, p: float) -> np.ndarray:
    """Exact stationary law of the number of 1-opinions on the complete graph.

    By symmetry the count is a birth-death chain: from ``k`` ones it gains one
    with probability ``(n-k)/n * (p/2 + q k/(n-1))`` and loses one with
    probability ``k/n * (p/2 + q (n-k)/(n-1))``. Returns masses over
    ``k = 0..n`` (computed in log space, valid for any ``n``).
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    q = 1.0 - p
    k = np.arange(n)
    up = (n - k) / n * (p / 2 + q * k / (n - 1))
    kk = np.arange(1, n + 1)
    down = kk / n * (p / 2 + q * (n - kk) / (n - 1))
    logw = np.concatenate(([0.0], np.cumsum(np.log(up) - np.log(down))))
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def complete_exact_summary(n: int, p: float) -> dict:
    """``sigma_sq`` and ``Var(Psi)`` on the complete graph from the count law.

    On ``K_n``, ``S = k/n`` and ``Psi = 2 k (n-k) / (n (n-1))``.
    """
    w = complete_count_law(n, p)
    k = np.arange(n + 1)
    s = k / n
    psi = 2.0 * k * (n - k) / (n * (n - 1))
    sigma_sq = float(w @ (s - 0.5) ** 2)
    var_psi = float(w @ psi**2 - (w @ psi) ** 2)
    return {"sigma_sq": sigma_sq, "var_psi": var_psi, "law": w}
