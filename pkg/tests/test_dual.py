"""Dual sampler: perfect samples, pair and four-particle estimators."""

import math

import numpy as np
import pytest

from noisy_voter.dual import (
    AbsorptionCapError,
    DualState,
    StubbornKernel,
    absorption_clock,
    dual_step,
    four_particle_orderings,
    meet_before_absorption,
    pair_meet_matrix,
    run_reference,
    sample_many,
    sample_S,
    sample_stationary,
    sigma_sq_via_dual,
)
from noisy_voter.exact import exact_gamma
from noisy_voter.forward import NvmParams
from noisy_voter.graphs import build_kernel
from noisy_voter.stats import chi2_pooled, two_sample_ks
from noisy_voter.streams import stream


def params(graph, p):
    return NvmParams(build_kernel(graph), p)


def codes(bits):
    return bits.astype(np.int64) @ (1 << np.arange(bits.shape[1], dtype=np.int64))


class TestStubborn:
    def test_rows(self):
        sk = StubbornKernel.from_params(params("cycle:4", 0.2))
        sk.check()
        cols, probs = sk.row(0)
        d = dict(zip(cols.tolist(), probs.tolist()))
        assert d[sk.zero] == pytest.approx(0.1) and d[sk.one] == pytest.approx(0.1)
        assert d[1] == pytest.approx(0.4)
        cols, probs = sk.row(sk.one)
        assert cols.tolist() == [sk.one] and probs.tolist() == [1.0]


class TestReference:
    def test_coalescence_permanent(self):
        rng = np.random.default_rng(42)
        sk = StubbornKernel.from_params(params("cycle:6", 0.1))
        for _ in range(50):
            st = DualState.start(6)
            while not st.done():
                dual_step(st, sk, rng)
                # merged particles share a position from then on
                for i in range(6):
                    assert st.position[i] == st.position[st.root(i)]

    def test_labels_before_done(self):
        with pytest.raises(ValueError):
            DualState.start(3).labels()

    def test_reference_law(self):
        p = params("cycle:4", 0.5)
        d = exact_gamma(p)
        rng = np.random.default_rng(42)
        m = 20_000
        counts = np.bincount(codes(np.array([run_reference(p, rng).labels() for _ in range(m)])), minlength=16)
        assert chi2_pooled(counts, d.gamma)[2] > 0.001

    def test_cap(self):
        with pytest.raises(AbsorptionCapError):
            run_reference(params("cycle:8", 0.001), np.random.default_rng(0), cap=10)


class TestSampler:
    def test_p1_iid_coins(self):
        bits = sample_many(params("star:5", 1.0), 40_000, stream(42, 0))
        counts = np.bincount(codes(bits), minlength=32)
        assert chi2_pooled(counts, np.full(32, 1 / 32))[2] > 0.001

    def test_marginals_half(self):
        bits = sample_many(params("star:6", 0.05), 40_000, stream(42, 1))
        se = 0.5 / math.sqrt(40_000)
        assert np.all(np.abs(bits.mean(axis=0) - 0.5) < 4 * se)

    @pytest.mark.parametrize("continuous", [False, True])
    def test_matches_oracle(self, continuous):
        p = params("complete:4", 0.3)
        d = exact_gamma(p)
        bits = sample_many(p, 100_000, stream(42, 2, int(continuous)), continuous=continuous)
        counts = np.bincount(codes(bits), minlength=16)
        assert chi2_pooled(counts, d.gamma)[2] > 0.001

    def test_discrete_vs_continuous(self):
        p = params("cycle:5", 0.3)
        a = sample_S(p, 100_000, stream(42, 3), continuous=False)
        b = sample_S(p, 100_000, stream(42, 4), continuous=True)
        _, pval = two_sample_ks(a, b)
        assert pval > 0.001

    def test_deterministic(self):
        p = params("torus:3x3", 0.2)
        np.testing.assert_array_equal(sample_many(p, 500, stream(7, 1)), sample_many(p, 500, stream(7, 1)))

    def test_single_sample(self):
        cfg = sample_stationary(params("cycle:5", 0.5), stream(1, 2))
        assert cfg.n == 5

    def test_absorption_clock(self):
        # discrete: the last class alone needs Geometric(p/n) steps
        p = params("cycle:3", 0.9)
        t = [absorption_clock(p, stream(3, i)) for i in range(2000)]
        assert min(t) >= 1
        t = [absorption_clock(p, stream(4, i), continuous=True) for i in range(2000)]
        assert min(t) > 0

    def test_psi_output(self):
        S, Psi = sample_S(params("cycle:6", 0.4), 2000, stream(5), with_psi=True)
        assert S.shape == Psi.shape and Psi.min() >= 0 and Psi.max() <= 1 + 1e-12

    def test_cap_error(self):
        with pytest.raises(AbsorptionCapError):
            sample_S(params("cycle:50", 1e-6), 3, stream(0), cap=100)

    def test_voter_model_rejected(self):
        with pytest.raises(Exception):
            sample_S(NvmParams.voter_model(build_kernel("cycle:5")), 10, stream(0))


class TestPairEstimator:
    def test_trivial(self):
        p = params("cycle:6", 0.3)
        assert meet_before_absorption(p, 2, 2, 10, stream(0)).value == 1.0
        assert meet_before_absorption(params("cycle:6", 1.0), 0, 3, 10, stream(0)).value == 0.0

    @pytest.mark.parametrize("graph,p", [("cycle:6", 0.2), ("star:5", 0.5)])
    def test_four_cov(self, graph, p):
        d = exact_gamma(params(graph, p))
        x, y = 0, 2
        est = meet_before_absorption(d.params, x, y, 100_000, stream(42, 5))
        assert est.within(4 * d.covariance[x, y], 4)

    def test_sigma_identity(self):
        d = exact_gamma(params("cycle:6", 0.3))
        est = sigma_sq_via_dual(d.params, 100_000, stream(42, 6))
        assert est.within(d.sigma_sq, 4)

    def test_range(self):
        with pytest.raises(IndexError):
            meet_before_absorption(params("cycle:4", 0.3), 0, 9, 10, stream(0))


class TestFourParticle:
    def test_distinct_required(self):
        with pytest.raises(ValueError):
            four_particle_orderings(params("cycle:6", 0.3), (0, 1, 1, 2), 10, stream(0))

    def test_p1_zero(self):
        f = four_particle_orderings(params("cycle:6", 1.0), (0, 1, 2, 3), 100, stream(0))
        assert f.total().value == 0.0

    def test_marginal_consistency(self):
        # pair events are the same whether or not other particles are present
        d = exact_gamma(params("complete:5", 0.3))
        f = four_particle_orderings(d.params, (0, 1, 2, 3), 100_000, stream(42, 7))
        for est, (a, b) in zip(f.as_tuple(), [(0, 3), (0, 2), (1, 2), (1, 3)]):
            assert est.within(4 * d.covariance[a, b], 4)

    def test_meet_matrix(self):
        m = pair_meet_matrix(params("cycle:6", 0.3), [0, 1, 3], 20_000, stream(42, 8))
        np.testing.assert_allclose(np.diag(m), 1.0)
        np.testing.assert_allclose(m, m.T)
        assert m[0, 1] > m[0, 2]  # neighbours meet more often than antipodes
