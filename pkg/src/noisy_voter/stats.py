"""Small statistical helpers shared by the samplers and the checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sst
from scipy.special import ndtr


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo mean with its standard error."""

    value: float
    se: float
    reps: int

    @classmethod
    def from_samples(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=float)
        m = len(x)
        if m == 0:
            raise ValueError("no samples")
        se = float(x.std(ddof=1) / math.sqrt(m)) if m > 1 else math.inf
        return cls(float(x.mean()), se, m)

    @classmethod
    def from_counts(cls, hits: int, reps: int) -> "Estimate":
        """Binomial frequency ``hits / reps``."""
        if reps <= 0:
            raise ValueError("reps must be positive")
        f = hits / reps
        return cls(f, math.sqrt(f * (1 - f) / reps), reps)

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.value - z * self.se, self.value + z * self.se

    def scale(self, c: float) -> "Estimate":
        return Estimate(self.value * c, self.se * abs(c), self.reps)

    def within(self, target: float, k: float) -> bool:
        """``|value - target| <= k * se`` (exact equality passes when se == 0)."""
        return abs(self.value - target) <= k * self.se

    def __format__(self, spec):
        spec = spec or ".6g"
        return f"{self.value:{spec}} ± {self.se:{spec}}"


def ks_to_normal(x) -> float:
    """Kolmogorov-Smirnov distance between the empirical law of ``x`` and N(0,1)."""
    x = np.sort(np.asarray(x, dtype=float))
    m = len(x)
    if m == 0:
        raise ValueError("no samples")
    cdf = ndtr(x)
    # on ties take the outermost empirical steps
    hi = np.searchsorted(x, x, side="right") / m
    lo = np.searchsorted(x, x, side="left") / m
    return float(max((hi - cdf).max(), (cdf - lo).max()))


def tv_distance(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def expected_tv_noise(probs, m: int) -> float:
    """Expected TV between an ``m``-sample empirical law and ``probs`` itself.

    Uses the normal approximation ``E|N(0, s^2)| = s sqrt(2/pi)`` per cell; it is
    the floor below which no exact sampler can reliably go.
    """
    p = np.asarray(probs, dtype=float)
    return 0.5 * float(np.sqrt(2 * p * (1 - p) / (math.pi * m)).sum())


def chi2_pooled(counts, probs, min_expected: float = 5.0) -> tuple[float, int, float]:
    """Pearson chi-square goodness of fit, pooling cells with small expectation.

    Cells whose expected count falls below ``min_expected`` are merged into one
    bin. Returns ``(statistic, dof, p_value)``.
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    m = counts.sum()
    exp = probs * m
    keep = exp >= min_expected
    obs_k, exp_k = counts[keep], exp[keep]
    if (~keep).any():
        obs_k = np.append(obs_k, counts[~keep].sum())
        exp_k = np.append(exp_k, exp[~keep].sum())
        if exp_k[-1] < min_expected and len(exp_k) > 1:
            obs_k[-2] += obs_k[-1]
            exp_k[-2] += exp_k[-1]
            obs_k, exp_k = obs_k[:-1], exp_k[:-1]
    dof = len(exp_k) - 1
    if dof < 1:
        return 0.0, 0, 1.0
    stat = float(((obs_k - exp_k) ** 2 / exp_k).sum())
    return stat, dof, float(sst.chi2.sf(stat, dof))


def two_sample_ks(a, b) -> tuple[float, float]:
    r = sst.ks_2samp(a, b)
    return float(r.statistic), float(r.pvalue)


def welch_z(a, b) -> float:
    """Standardised difference of means."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    return (a.mean() - b.mean()) / se if se > 0 else 0.0


def variance_estimate(x) -> Estimate:
    """Sample variance with a delta-method SE from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    m = len(x)
    d = x - x.mean()
    v = float(d @ d / (m - 1))
    m4 = float(np.mean(d**4))
    se = math.sqrt(max(m4 - v * v, 0.0) / m)
    return Estimate(v, se, m)
