"""Graph families and their simple-random-walk transition kernels."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

FAMILIES = ("cycle", "torus", "hypercube", "complete", "star", "edges")
# families whose automorphism group acts transitively on vertices
TRANSITIVE_FAMILIES = ("cycle", "torus", "hypercube", "complete")


class GraphError(ValueError):
    """Raised for malformed or unsupported graph specifications."""


@dataclass(frozen=True)
class GraphSpec:
    """Declarative description of a finite connected simple graph.

    ``size`` holds the family parameter: the vertex count for cycle, complete
    and star, the dimension for hypercube and the side lengths for torus.
    Edge lists carry explicit ``n`` and ``edges``.
    """

    family: str
    size: tuple[int, ...] = ()
    edges: tuple[tuple[int, int], ...] = field(default=(), repr=False)
    source: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GraphError(f"unknown graph family {self.family!r}")

    @classmethod
    def cycle(cls, n):
        return cls("cycle", (int(n),))

    @classmethod
    def torus(cls, *dims):
        if len(dims) == 1 and not isinstance(dims[0], (int, np.integer)):
            dims = tuple(dims[0])
        return cls("torus", tuple(int(d) for d in dims))

    @classmethod
    def hypercube(cls, dim):
        return cls("hypercube", (int(dim),))

    @classmethod
    def complete(cls, n):
        return cls("complete", (int(n),))

    @classmethod
    def star(cls, n):
        return cls("star", (int(n),))

    @classmethod
    def edge_list(cls, n, edges, source=None):
        return cls("edges", (int(n),), tuple((int(u), int(v)) for u, v in edges), source)

    @classmethod
    def parse(cls, text: str) -> "GraphSpec":
        """Parse the CLI mini-grammar: ``cycle:N``, ``torus:AxB``, ``hypercube:D``,
        ``complete:N``, ``star:N`` or ``edges:PATH``.

        A bare path ending in ``.yaml``, ``.yml`` or ``.json`` is read as a
        config file (see :meth:`from_config`).
        """
        text = text.strip()
        if text.endswith((".yaml", ".yml", ".json")) and ":" not in text.split("/")[-1]:
            return cls.from_config(text)
        family, sep, arg = text.partition(":")
        family = family.lower()
        if not sep or not arg:
            raise GraphError(f"graph spec {text!r} is not of the form family:arg")
        if family == "edges":
            return read_edge_file(arg)
        try:
            if family == "torus":
                return cls.torus(*(int(a) for a in arg.lower().split("x")))
            value = int(arg)
        except ValueError as exc:
            raise GraphError(f"bad size in graph spec {text!r}") from exc
        if family not in ("cycle", "hypercube", "complete", "star"):
            raise GraphError(f"unknown graph family {family!r}")
        return cls(family, (value,))

    @classmethod
    def from_config(cls, config) -> "GraphSpec":
        """Build a spec from a mapping or a YAML/JSON file with keys ``family``
        and ``n``/``dims``/``dim`` (or ``path`` for edge lists)."""
        if isinstance(config, (str, Path)):
            import yaml

            with open(config) as fh:
                config = yaml.safe_load(fh)
        if not isinstance(config, dict) or "family" not in config:
            raise GraphError("graph config needs a 'family' key")
        family = str(config["family"]).lower()
        if family == "torus":
            if "dims" in config:
                return cls.torus(*config["dims"])
            side = math.isqrt(int(config["n"]))
            if side * side != int(config["n"]):
                raise GraphError("torus given by n must have a perfect-square n")
            return cls.torus(side, side)
        if family == "hypercube":
            return cls.hypercube(config.get("dim", config.get("n")))
        if family == "edges":
            if "path" in config:
                return read_edge_file(config["path"])
            return cls.edge_list(config["n"], config["edges"])
        return cls(family, (int(config["n"]),))

    @property
    def label(self) -> str:
        if self.family == "torus":
            return "torus:" + "x".join(map(str, self.size))
        if self.family == "edges":
            return f"edges:{self.source}" if self.source else f"edges:n{self.size[0]}"
        return f"{self.family}:{self.size[0]}"

    def __str__(self):
        return self.label


def read_edge_file(path) -> GraphSpec:
    """Read a whitespace-separated ``u v`` edge file with 0-indexed vertices."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected 'u v'")
            edges.append((int(parts[0]), int(parts[1])))
    if not edges:
        raise GraphError(f"{path}: no edges")
    n = 1 + max(max(e) for e in edges)
    return GraphSpec.edge_list(n, edges, source=str(path))


def _adjacency(spec: GraphSpec) -> list[list[int]]:
    fam, size = spec.family, spec.size
    if fam == "cycle":
        (n,) = size
        if n < 3:
            raise GraphError("cycle needs n >= 3")
        return [[(x - 1) % n, (x + 1) % n] for x in range(n)]
    if fam == "torus":
        if not size or any(s < 3 for s in size):
            raise GraphError("torus sides must all be >= 3")
        strides = np.cumprod((1,) + size[:-1])
        adj = []
        for coords in itertools.product(*(range(s) for s in reversed(size))):
            coords = coords[::-1]
            nbrs = []
            for d, s in enumerate(size):
                for step in (-1, 1):
                    c = list(coords)
                    c[d] = (c[d] + step) % s
                    nbrs.append(int(np.dot(c, strides)))
            adj.append(nbrs)
        return adj
    if fam == "hypercube":
        (dim,) = size
        if dim < 1:
            raise GraphError("hypercube needs dim >= 1")
        return [[x ^ (1 << b) for b in range(dim)] for x in range(1 << dim)]
    if fam == "complete":
        (n,) = size
        if n < 2:
            raise GraphError("complete graph needs n >= 2")
        return [[y for y in range(n) if y != x] for x in range(n)]
    if fam == "star":
        (n,) = size
        if n < 2:
            raise GraphError("star needs n >= 2")
        return [list(range(1, n))] + [[0] for _ in range(1, n)]
    # edge list
    (n,) = size
    nbrs = [set() for _ in range(n)]
    for u, v in spec.edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise GraphError(f"self-loop at vertex {u} is not allowed")
        nbrs[u].add(v)
        nbrs[v].add(u)
    return [sorted(s) for s in nbrs]


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Reversible, irreducible row-stochastic matrix stored in CSR form.

    Rows are ``probs[indptr[x]:indptr[x+1]]`` over columns
    ``indices[indptr[x]:indptr[x+1]]``; ``cum`` holds the per-row cumulative
    sums used for sampling. ``uniform_rows`` marks simple-random-walk kernels
    where each row is uniform on its support.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    probs: np.ndarray
    pi: np.ndarray
    family: str = "general"
    label: str = "general"
    uniform_rows: bool = False
    transitive: bool = False
    dims: tuple[int, ...] = ()

    def __post_init__(self):
        cum = np.empty_like(self.probs)
        for x in range(self.n):
            lo, hi = self.indptr[x], self.indptr[x + 1]
            cum[lo:hi] = np.cumsum(self.probs[lo:hi])
            cum[hi - 1] = 1.0
        object.__setattr__(self, "cum", cum)

    @property
    def pi_star(self) -> float:
        return float(self.pi.max())

    @property
    def nu_sq(self) -> float:
        return float(np.dot(self.pi, self.pi))

    @property
    def nu(self) -> float:
        return math.sqrt(self.nu_sq)

    @property
    def degree_based(self) -> bool:
        return self.uniform_rows

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.probs, self.indices, self.indptr), shape=(self.n, self.n))

    def dense(self) -> np.ndarray:
        return self.matrix().toarray()

    def row(self, x):
        lo, hi = self.indptr[x], self.indptr[x + 1]
        return self.indices[lo:hi], self.probs[lo:hi]

    def relabel(self, perm) -> "TransitionKernel":
        """Kernel of the same walk with vertex ``x`` renamed ``perm[x]``."""
        perm = np.asarray(perm)
        P = self.matrix().tocoo()
        Q = sp.csr_matrix((P.data, (perm[P.row], perm[P.col])), shape=P.shape)
        Q.sort_indices()
        pi = np.empty_like(self.pi)
        pi[perm] = self.pi
        return TransitionKernel(
            self.n, Q.indptr.astype(np.int64), Q.indices.astype(np.int64), Q.data.astype(float),
            pi, self.family, self.label + "~relabelled", self.uniform_rows, self.transitive, self.dims,
        )

    def __repr__(self):
        return f"TransitionKernel({self.label}, n={self.n})"


def build_kernel(spec: GraphSpec | str) -> TransitionKernel:
    """Simple random walk ``P(x, y) = 1{x ~ y} / d(x)`` with ``pi(x) = d(x) / 2m``."""
    if isinstance(spec, str):
        spec = GraphSpec.parse(spec)
    adj = _adjacency(spec)
    n = len(adj)
    if n < 2:
        raise GraphError("graph needs at least 2 vertices")
    if any(len(a) == 0 for a in adj) or not _connected(adj):
        raise GraphError(f"graph {spec.label} is not connected")
    deg = np.array([len(a) for a in adj], dtype=np.int64)
    indptr = np.concatenate(([0], np.cumsum(deg))).astype(np.int64)
    indices = np.array([y for a in adj for y in sorted(a)], dtype=np.int64)
    probs = np.repeat(1.0 / deg, deg)
    pi = deg / deg.sum()
    k = TransitionKernel(
        n, indptr, indices, probs, pi,
        family=spec.family, label=spec.label, uniform_rows=True,
        transitive=spec.family in TRANSITIVE_FAMILIES,
        dims=spec.size if spec.family == "torus" else (),
    )
    check_kernel(k)
    return k


def _connected(adj) -> bool:
    n = len(adj)
    rows = np.repeat(np.arange(n), [len(a) for a in adj])
    cols = np.array([y for a in adj for y in a], dtype=np.int64)
    A = sp.csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(A, directed=False)
    return ncomp == 1


def kernel_from_matrix(P, pi=None, label="general", tol=1e-12) -> TransitionKernel:
    """Wrap a reversible irreducible stochastic matrix (dense or sparse).

    The stationary law is computed from detailed balance along a spanning
    tree when not supplied, then checked globally.
    """
    P = sp.csr_matrix(P, dtype=float)
    P.eliminate_zeros()
    P.sort_indices()
    n = P.shape[0]
    if P.shape != (n, n) or n < 1:
        raise GraphError("transition matrix must be square")
    if pi is None:
        pi = _reversible_stationary(P)
    k = TransitionKernel(
        n, P.indptr.astype(np.int64), P.indices.astype(np.int64), P.data.copy(),
        np.asarray(pi, dtype=float), label=label,
    )
    check_kernel(k, tol=tol)
    return k


def _reversible_stationary(P: sp.csr_matrix) -> np.ndarray:
    n = P.shape[0]
    weights = np.full(n, np.nan)
    weights[0] = 1.0
    stack = [0]
    Pt = P.T.tocsr()
    while stack:
        x = stack.pop()
        lo, hi = P.indptr[x], P.indptr[x + 1]
        for y, pxy in zip(P.indices[lo:hi], P.data[lo:hi]):
            if np.isnan(weights[y]) and pxy > 0:
                pyx = Pt[x, y]
                if pyx <= 0:
                    raise GraphError("kernel is not reversible (one-way edge)")
                weights[y] = weights[x] * pxy / pyx
                stack.append(y)
    if np.isnan(weights).any():
        raise GraphError("kernel is not irreducible")
    return weights / weights.sum()


def check_kernel(k: TransitionKernel, tol: float = 1e-12) -> None:
    """Assert row-stochasticity, reversibility and irreducibility."""
    P = k.matrix()
    if (k.probs < 0).any():
        raise GraphError("negative transition probability")
    rows = np.asarray(P.sum(axis=1)).ravel()
    if np.abs(rows - 1.0).max() > tol:
        raise GraphError("rows do not sum to 1")
    if abs(k.pi.sum() - 1.0) > tol or (k.pi <= 0).any():
        raise GraphError("stationary law must be a positive probability vector")
    flow = sp.diags(k.pi) @ P
    if abs(flow - flow.T).max() > tol:
        raise GraphError("kernel is not reversible with respect to pi")
    ncomp, _ = connected_components(P, directed=True, connection="strong")
    if ncomp != 1:
        raise GraphError("kernel is not irreducible")


def kernel_scalars(k: TransitionKernel) -> tuple[float, float, float]:
    """Return ``(pi_star, nu_sq, pi_star / nu)``."""
    return k.pi_star, k.nu_sq, k.pi_star / k.nu


@dataclass(frozen=True)
class EdgeMeasure:
    """``mu(x, y) = pi(x)^2 P(x, y) / nu^2`` on the directed support of ``P``."""

    src: np.ndarray
    dst: np.ndarray
    mu: np.ndarray

    @property
    def total(self) -> float:
        return float(self.mu.sum())

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(int(a), int(b)): float(m) for a, b, m in zip(self.src, self.dst, self.mu)}


def edge_measure(k: TransitionKernel) -> EdgeMeasure:
    src = np.repeat(np.arange(k.n), np.diff(k.indptr))
    mu = k.pi[src] ** 2 * k.probs / k.nu_sq
    return EdgeMeasure(src, k.indices.copy(), mu)
