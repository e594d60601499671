"""Graph families, SRW kernels, scalars and the edge measure."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_voter.graphs import (
    GraphError,
    GraphSpec,
    build_kernel,
    check_kernel,
    edge_measure,
    kernel_from_matrix,
    kernel_scalars,
    read_edge_file,
)

SPECS = ["cycle:4", "cycle:9", "torus:3x3", "torus:3x4x5", "hypercube:4", "complete:5", "star:6", "complete:2"]


def graph_specs():
    return st.one_of(
        st.integers(3, 40).map(lambda n: f"cycle:{n}"),
        st.tuples(st.integers(3, 7), st.integers(3, 7)).map(lambda d: f"torus:{d[0]}x{d[1]}"),
        st.integers(1, 6).map(lambda d: f"hypercube:{d}"),
        st.integers(2, 20).map(lambda n: f"complete:{n}"),
        st.integers(2, 20).map(lambda n: f"star:{n}"),
    )


class TestFamilies:
    def test_cycle4(self):
        k = build_kernel("cycle:4")
        P = k.dense()
        for x in range(4):
            assert P[x, (x + 1) % 4] == 0.5 and P[x, (x - 1) % 4] == 0.5
        np.testing.assert_allclose(k.pi, 0.25)

    def test_complete5(self):
        P = build_kernel("complete:5").dense()
        np.testing.assert_allclose(P, (np.ones((5, 5)) - np.eye(5)) / 4)

    def test_star_center_mass(self):
        k = build_kernel("star:10")
        assert k.pi[0] == pytest.approx(0.5)
        assert k.nu_sq >= 0.25

    def test_star10_nu_sq(self):
        # degrees: centre 9, leaves 1, 2m = 18
        deg = np.array([9] + [1] * 9)
        expected = float(((deg / deg.sum()) ** 2).sum())
        assert build_kernel("star:10").nu_sq == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.25 + 9 / 18**2)

    def test_torus_indexing(self):
        k = build_kernel("torus:3x4")
        assert k.n == 12
        assert set(np.diff(k.indptr)) == {4}

    def test_hypercube_neighbours(self):
        k = build_kernel("hypercube:3")
        nbrs, _ = k.row(0)
        assert sorted(nbrs) == [1, 2, 4]

    @pytest.mark.parametrize("bad", ["cycle:2", "torus:2x5", "hypercube:0", "complete:1", "star:1"])
    def test_degenerate_rejected(self, bad):
        with pytest.raises(GraphError):
            build_kernel(bad)

    def test_disconnected_rejected(self):
        with pytest.raises(GraphError, match="not connected"):
            build_kernel(GraphSpec.edge_list(4, [(0, 1), (2, 3)]))

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError, match="self-loop"):
            build_kernel(GraphSpec.edge_list(3, [(0, 1), (1, 1), (1, 2)]))

    def test_edge_list_dedup(self):
        k = build_kernel(GraphSpec.edge_list(3, [(0, 1), (1, 0), (1, 2), (0, 1)]))
        assert k.indices.size == 4

    @pytest.mark.parametrize("text", ["cycle", "cycle:x", "blob:3", "torus:3y3"])
    def test_bad_spec_strings(self, text):
        with pytest.raises(GraphError):
            GraphSpec.parse(text)


class TestParsing:
    def test_edge_file(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("# square\n0 1\n1 2\n2 3\n3 0\n")
        spec = read_edge_file(f)
        k = build_kernel(spec)
        np.testing.assert_allclose(k.dense(), build_kernel("cycle:4").dense())
        assert GraphSpec.parse(f"edges:{f}").edges == spec.edges

    def test_yaml_config(self, tmp_path):
        f = tmp_path / "g.yaml"
        f.write_text("family: torus\nn: 16\n")
        assert GraphSpec.parse(str(f)).size == (4, 4)
        assert GraphSpec.from_config({"family": "hypercube", "dim": 3}).label == "hypercube:3"

    def test_label_roundtrip(self):
        for s in SPECS:
            assert GraphSpec.parse(s).label == s


class TestKernelInvariants:
    @settings(max_examples=60, deadline=None)
    @given(graph_specs())
    def test_stochastic_reversible_irreducible(self, spec):
        k = build_kernel(spec)
        check_kernel(k)
        P = k.matrix()
        np.testing.assert_allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-12)
        F = (P.T.multiply(k.pi)).T.toarray()
        np.testing.assert_allclose(F, F.T, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(graph_specs())
    def test_edge_measure_normalised(self, spec):
        em = edge_measure(build_kernel(spec))
        assert abs(em.total - 1.0) < 1e-12
        assert (em.mu > 0).all()

    @pytest.mark.parametrize("spec", ["torus:3x3", "torus:4x5x3", "hypercube:5", "cycle:11", "complete:7"])
    def test_transitive_pi_uniform(self, spec):
        k = build_kernel(spec)
        assert k.transitive
        assert k.pi.max() - k.pi.min() < 1e-15

    def test_regular_ratio(self):
        assert kernel_scalars(build_kernel("cycle:100"))[2] == pytest.approx(0.1, abs=1e-15)
        for spec in ["torus:5x5", "hypercube:6", "complete:9"]:
            k = build_kernel(spec)
            assert kernel_scalars(k)[2] == pytest.approx(k.n**-0.5, rel=1e-12)

    def test_complete2_scalars(self):
        ps, nu2, r = kernel_scalars(build_kernel("complete:2"))
        assert ps == pytest.approx(0.5)
        assert r == pytest.approx(1 / math.sqrt(2))

    def test_cycle4_mu_uniform(self):
        em = edge_measure(build_kernel("cycle:4"))
        assert len(em.mu) == 8
        np.testing.assert_allclose(em.mu, 1 / 8)

    def test_regular_mu(self):
        k = build_kernel("hypercube:4")
        np.testing.assert_allclose(edge_measure(k).mu, k.probs / k.n)

    def test_star3_mu(self):
        em = edge_measure(build_kernel("star:3")).as_dict()
        # centre has pi = 1/2, leaves 1/4
        assert em[(0, 1)] > em[(1, 0)]
        assert sum(em.values()) == pytest.approx(1.0)

    def test_flow_identity(self):
        # sum_x pi(x) P(x, A) = pi(A)
        rng = np.random.default_rng(42)
        for spec in ["star:7", "torus:3x4", "cycle:9"]:
            k = build_kernel(spec)
            P = k.dense()
            for _ in range(200):
                A = rng.random(k.n) < 0.5
                assert abs(k.pi @ P[:, A].sum(axis=1) - k.pi[A].sum()) < 1e-12

    def test_relabel_preserves_scalars(self):
        k = build_kernel("star:6")
        perm = np.random.default_rng(42).permutation(k.n)
        k2 = k.relabel(perm)
        check_kernel(k2)
        assert k2.nu_sq == pytest.approx(k.nu_sq)
        assert k2.pi[perm[0]] == pytest.approx(0.5)


class TestKernelFromMatrix:
    def test_recovers_pi(self):
        k = build_kernel("star:5")
        k2 = kernel_from_matrix(k.dense())
        np.testing.assert_allclose(k2.pi, k.pi, atol=1e-15)

    def test_non_reversible_rejected(self):
        P = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
        with pytest.raises(GraphError):
            kernel_from_matrix(P)

    def test_bad_rows_rejected(self):
        with pytest.raises(GraphError):
            kernel_from_matrix(np.array([[0.5, 0.4], [0.5, 0.5]]))

    def test_single_vertex(self):
        k = kernel_from_matrix(np.array([[1.0]]))
        assert k.n == 1 and k.pi[0] == 1.0
