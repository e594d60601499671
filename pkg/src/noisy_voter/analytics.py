"""Closed forms, bounds and distributional diagnostics for the stationary
fraction ``S``."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .graphs import EdgeMeasure, TransitionKernel
from .stats import ks_to_normal
from .walks import Theta


def cycle_sigma_sq(n: int, p: float) -> float:
    """Exact ``Var(S)`` on the n-cycle.

    Parameters
    ----------
    n : int
        Cycle length, at least 3.
    p : float
        Noise probability in (0, 1].

    Returns
    -------
    float
        ``(1/(4n)) * (1 + 2 theta (1 - theta^(n-1)) / ((1 - theta)(1 + theta^n)))``,
        evaluated in log space so that tiny ``p`` keeps full precision.
    """
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    th = Theta(p)
    t = th.theta
    if t == 0.0:
        return 1.0 / (4 * n)
    log_t = math.log1p(-th.one_minus)  # log(theta) loses digits when theta is near 1
    # (1 - t^(n-1)) / (1 - t) with both factors free of cancellation
    ratio = -math.expm1((n - 1) * log_t) / th.one_minus
    corr = 2.0 * t * ratio / (1.0 + math.exp(n * log_t))
    return (1.0 + corr) / (4 * n)


@dataclass(frozen=True)
class VarianceBounds:
    iid: float  # nu^2 / 4
    hitting: float | None  # 1 / (4 (1 + 4 p t_hit)), only for p <= 1/2

    def holds_for(self, sigma_sq: float, rtol: float = 1e-12) -> bool:
        slack = rtol * max(sigma_sq, 1e-300)
        ok = sigma_sq + slack >= self.iid
        if self.hitting is not None:
            ok = ok and sigma_sq + slack >= self.hitting
        return ok


def variance_lower_bounds(kernel: TransitionKernel, p: float, t_hit: float | None = None) -> VarianceBounds:
    """The i.i.d. floor ``nu^2/4`` and, for ``p <= 1/2``, the hitting-time floor."""
    hit = None
    if p <= 0.5:
        if t_hit is None:
            raise ValueError("t_hit is required when p <= 1/2")
        hit = 1.0 / (4.0 * (1.0 + 4.0 * p * t_hit))
    return VarianceBounds(kernel.nu_sq / 4.0, hit)


def psi_value(cfg, em: EdgeMeasure) -> float:
    """``sum_{x,y} mu(x,y) 1{xi(x) != xi(y)}``."""
    bits = getattr(cfg, "bits", cfg)
    bits = np.asarray(bits)
    if bits.max(initial=0) >= 2 or len(bits) <= max(em.src.max(initial=0), em.dst.max(initial=0)):
        raise ValueError("configuration does not match the edge measure")
    return float(em.mu[bits[em.src] != bits[em.dst]].sum())


@dataclass(frozen=True)
class SteinBracket:
    """The three terms bounding the Kolmogorov distance of ``W``, without the
    universal constant in front."""

    term1: float
    term2: float
    term3: float
    term3_cap: float  # term3 with Var(Psi) replaced by its upper bound

    @property
    def total(self) -> float:
        return self.term1 + self.term2 + self.term3

    def as_dict(self) -> dict:
        return {"term1": self.term1, "term2": self.term2, "term3": self.term3, "bracket_total": self.total}


def stein_bracket(kernel: TransitionKernel, p: float, sigma_sq: float, var_psi: float) -> SteinBracket:
    """Evaluate ``(pi*/s)^3 n/p + (pi*/s)^2 sqrt(n/p) + nu^2/(p s^2) sqrt(Var Psi)``."""
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    if var_psi < 0:
        raise ValueError("var_psi must be non-negative")
    n = kernel.n
    sigma = math.sqrt(sigma_sq)
    r = kernel.pi_star / sigma
    nu_sq = kernel.nu_sq
    return SteinBracket(
        term1=r**3 * n / p,
        term2=r**2 * math.sqrt(n / p),
        term3=nu_sq / (p * sigma_sq) * math.sqrt(var_psi),
        term3_cap=4.0 * kernel.pi_star / (p * sigma),
    )


def psi_variance_bound(kernel: TransitionKernel, sigma_sq: float) -> float:
    """``16 sigma^2 (pi*)^2 / nu^4``."""
    return 16.0 * sigma_sq * kernel.pi_star**2 / kernel.nu_sq**2


@dataclass(frozen=True)
class GaussianCondition:
    scalar: float  # (pi*/nu)^3 n / p
    degree_form: float | None  # (max d / sqrt(sum d^2))^3 n / p

    def fails(self, threshold: float = 1.0) -> bool:
        return self.scalar >= threshold


def gaussian_condition(kernel: TransitionKernel, p: float) -> GaussianCondition:
    """Sufficient-condition scalar for Gaussian fluctuations of ``W``."""
    n = kernel.n
    scalar = (kernel.pi_star / kernel.nu) ** 3 * n / p
    deg = None
    if kernel.degree_based:
        d = kernel.degrees.astype(float)
        deg = (d.max() / math.sqrt(float(d @ d))) ** 3 * n / p
    return GaussianCondition(scalar, deg)


def hard_condition(kernel: TransitionKernel, p: float, sigma_sq: float) -> float:
    """``(pi*/sigma)^3 n/p + pi*/(sigma p)``."""
    sigma = math.sqrt(sigma_sq)
    r = kernel.pi_star / sigma
    return r**3 * kernel.n / p + kernel.pi_star / (sigma * p)


def ks_to_gaussian(samples, sigma: float) -> float:
    """Kolmogorov distance of ``(S - 1/2) / sigma`` to the standard normal."""
    s = np.asarray(samples, dtype=float)
    if len(s) < 100:
        raise ValueError("need at least 100 samples")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return ks_to_normal((s - 0.5) / sigma)


class Verdict(str, enum.Enum):
    GAUSSIAN = "GaussianTrend"
    BERNOULLI = "BernoulliTrend"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class VerdictThresholds:
    eps: float = 0.05
    var_min: float = 0.23
    mass_min: float = 0.9
    ks_max: float = 0.05


@dataclass(frozen=True)
class LimitVerdict:
    ks_to_gaussian: float | None
    sigma_hat_sq: float
    endpoint_mass: float
    verdict: Verdict


def endpoint_mass(samples, eps: float) -> float:
    s = np.asarray(samples, dtype=float)
    return float(np.mean((s < eps) | (s > 1.0 - eps)))


def bernoulli_verdict(samples, eps: float = 0.05, sigma: float | None = None,
                      thresholds: VerdictThresholds | None = None) -> LimitVerdict:
    """Classify samples of ``S`` as Bernoulli-like, Gaussian-like or neither.

    The variance is taken about the exact mean 1/2. Bernoulli wins when that
    variance and the mass within ``eps`` of {0, 1} both clear their
    thresholds. Otherwise, if ``sigma`` is given and the standardised samples
    sit within ``ks_max`` of the normal law, the verdict is Gaussian.
    """
    th = thresholds or VerdictThresholds(eps=eps)
    if not 0.0 < th.eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    s = np.asarray(samples, dtype=float)
    var = float(np.mean((s - 0.5) ** 2))  # E(S) = 1/2 is known exactly
    mass = endpoint_mass(s, th.eps)
    ks = ks_to_gaussian(s, sigma) if sigma is not None and len(s) >= 100 else None
    if var > th.var_min and mass > th.mass_min:
        v = Verdict.BERNOULLI
    elif ks is not None and ks < th.ks_max:
        v = Verdict.GAUSSIAN
    else:
        v = Verdict.INDETERMINATE
    return LimitVerdict(ks, var, mass, v)
