"""Closed forms, bounds, the Stein bracket and the limit-law verdicts."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sst

from noisy_voter.analytics import (
    Verdict,
    VerdictThresholds,
    bernoulli_verdict,
    cycle_sigma_sq,
    endpoint_mass,
    gaussian_condition,
    hard_condition,
    ks_to_gaussian,
    psi_variance_bound,
    stein_bracket,
    variance_lower_bounds,
)
from noisy_voter.exact import complete_exact_summary, exact_gamma, exact_psi_variance
from noisy_voter.forward import NvmParams
from noisy_voter.graphs import build_kernel
from noisy_voter.stats import Estimate, chi2_pooled, expected_tv_noise, ks_to_normal, tv_distance, variance_estimate
from noisy_voter.walks import hitting_time


class TestCycleSigma:
    def test_p1(self):
        assert cycle_sigma_sq(10, 1.0) == pytest.approx(1 / 40)

    @settings(max_examples=200)
    @given(st.integers(3, 10**6), st.floats(1e-14, 1.0))
    def test_range(self, n, p):
        s = cycle_sigma_sq(n, p)
        assert 1 / (4 * n) - 1e-15 <= s <= 0.25 + 1e-15

    def test_tiny_p_limit(self):
        # p -> 0 forces consensus
        assert cycle_sigma_sq(64, 1e-14) == pytest.approx(0.25, rel=1e-5)

    def test_monotone_in_p(self):
        s = [cycle_sigma_sq(20, p) for p in (0.001, 0.01, 0.1, 0.5)]
        assert all(a > b for a, b in zip(s, s[1:]))

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            cycle_sigma_sq(2, 0.5)


class TestLowerBounds:
    @pytest.mark.parametrize("graph", ["complete:6", "cycle:9", "star:7", "hypercube:3"])
    def test_hold_on_oracle(self, graph):
        k = build_kernel(graph)
        t_hit = hitting_time(k).value
        for p in (0.01, 0.1, 0.5, 0.9):
            d = exact_gamma(NvmParams(k, p))
            assert variance_lower_bounds(k, p, t_hit).holds_for(d.sigma_sq)

    def test_hitting_bound_only_small_p(self):
        k = build_kernel("cycle:5")
        assert variance_lower_bounds(k, 0.7).hitting is None
        with pytest.raises(ValueError):
            variance_lower_bounds(k, 0.3)

    def test_p1_iid_tight(self):
        k = build_kernel("star:6")
        assert exact_gamma(NvmParams(k, 1.0)).sigma_sq == pytest.approx(k.nu_sq / 4, abs=1e-14)


class TestStein:
    def test_psi_bound_on_oracle(self):
        for graph in ("cycle:7", "star:6", "complete:6"):
            k = build_kernel(graph)
            for p in (0.05, 0.5):
                d = exact_gamma(NvmParams(k, p))
                assert exact_psi_variance(d) <= psi_variance_bound(k, d.sigma_sq) * (1 + 1e-12)

    def test_complete_bracket_decreases(self):
        totals = []
        for n in (16, 64, 256):
            p = 4 / math.sqrt(n)
            s = complete_exact_summary(n, p)
            b = stein_bracket(build_kernel(f"complete:{n}"), p, s["sigma_sq"], s["var_psi"])
            assert b.term3 <= b.term3_cap
            totals.append(b.total)
        assert totals[0] > totals[1] > totals[2]

    def test_invalid(self):
        k = build_kernel("cycle:5")
        with pytest.raises(ValueError):
            stein_bracket(k, 0.5, 0.0, 0.1)
        with pytest.raises(ValueError):
            stein_bracket(k, 0.5, 0.1, -1.0)

    def test_as_dict(self):
        b = stein_bracket(build_kernel("cycle:5"), 0.5, 0.05, 0.01)
        assert b.as_dict()["bracket_total"] == pytest.approx(b.term1 + b.term2 + b.term3)


class TestConditions:
    @pytest.mark.parametrize("graph", ["cycle:30", "torus:5x6", "star:9", "hypercube:5"])
    def test_forms_agree(self, graph):
        c = gaussian_condition(build_kernel(graph), 0.2)
        assert c.degree_form == pytest.approx(c.scalar, rel=1e-12)

    def test_regular_scalar(self):
        c = gaussian_condition(build_kernel("complete:100"), 0.4)
        assert c.scalar == pytest.approx(100**-1.5 * 100 / 0.4)
        assert not c.fails()

    def test_hard_condition_positive(self):
        assert hard_condition(build_kernel("cycle:8"), 0.5, 0.05) > 0


class TestVerdicts:
    def test_gaussian(self):
        rng = np.random.default_rng(42)
        s = 0.5 + 0.05 * rng.standard_normal(20_000)
        v = bernoulli_verdict(s, sigma=0.05)
        assert v.verdict is Verdict.GAUSSIAN and v.ks_to_gaussian < 0.02

    def test_bernoulli(self):
        rng = np.random.default_rng(42)
        s = rng.integers(0, 2, 2000).astype(float)
        v = bernoulli_verdict(s)
        assert v.verdict is Verdict.BERNOULLI and v.endpoint_mass == 1.0
        assert v.sigma_hat_sq == pytest.approx(0.25)

    def test_indeterminate(self):
        s = np.random.default_rng(42).random(2000)
        assert bernoulli_verdict(s, sigma=0.1).verdict is Verdict.INDETERMINATE

    def test_thresholds(self):
        s = np.r_[np.zeros(500), np.ones(500), np.full(40, 0.5)]  # var 0.240, mass 0.962
        assert bernoulli_verdict(s).verdict is Verdict.BERNOULLI
        strict = VerdictThresholds(mass_min=0.97)
        assert bernoulli_verdict(s, thresholds=strict).verdict is Verdict.INDETERMINATE

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            bernoulli_verdict(np.zeros(10), eps=0.6)

    def test_endpoint_mass(self):
        assert endpoint_mass([0.01, 0.5, 0.99, 0.2], 0.05) == 0.5

    def test_ks_needs_samples(self):
        with pytest.raises(ValueError):
            ks_to_gaussian(np.zeros(10), 1.0)


class TestStats:
    def test_ks_matches_scipy(self):
        x = np.random.default_rng(42).standard_normal(5000)
        assert ks_to_normal(x) == pytest.approx(sst.kstest(x, "norm").statistic, abs=1e-12)

    def test_ks_ties(self):
        # a point mass at 0 is 1/2 away from the normal cdf
        assert ks_to_normal(np.zeros(100)) == pytest.approx(0.5)

    def test_tv(self):
        assert tv_distance([0.5, 0.5], [1.0, 0.0]) == 0.5

    def test_tv_noise_matches_simulation(self):
        rng = np.random.default_rng(42)
        probs = rng.dirichlet(np.ones(16))
        m = 10_000
        sims = [tv_distance(rng.multinomial(m, probs) / m, probs) for _ in range(400)]
        assert np.mean(sims) == pytest.approx(expected_tv_noise(probs, m), rel=0.05)

    def test_chi2_pooling(self):
        probs = np.array([0.5, 0.49, 0.005, 0.005])
        counts = np.array([50, 49, 1, 0])
        stat, dof, pval = chi2_pooled(counts, probs)
        assert dof == 1 and 0 <= pval <= 1

    def test_chi2_uniform(self):
        rng = np.random.default_rng(42)
        pvals = [chi2_pooled(rng.multinomial(1000, np.full(8, 1 / 8)), np.full(8, 1 / 8))[2] for _ in range(500)]
        # p-values are roughly uniform under the null
        assert 0.4 < np.mean(pvals) < 0.6

    def test_estimate(self):
        e = Estimate.from_counts(25, 100)
        assert e.value == 0.25 and e.se == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
        assert e.scale(0.5).se == pytest.approx(e.se / 2)
        assert e.within(0.3, 2)
        assert f"{Estimate(1.0, 0.5, 3):.2f}" == "1.00 ± 0.50"

    def test_variance_estimate(self):
        x = np.random.default_rng(42).standard_normal(50_000)
        assert variance_estimate(x).within(1.0, 4)
