"""Parameter sweeps across graph sizes and noise levels.

Each plan row gets its own random stream ``(seed, row_index)``, so the table
is identical whether rows run one after another or on a thread pool.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import analytics, dual, exact, walks
from .forward import NvmParams
from .graphs import GraphSpec, build_kernel
from .streams import stream

log = logging.getLogger(__name__)

COLUMNS = (
    "graph", "reps", "n", "p", "sigma_sq", "sigma_src", "sigma_hat_sq", "ks", "endpoint_mass",
    "term1", "term2", "term3", "bracket_total", "verdict", "error",
)
# above this many directed edges Psi is not tracked per sample
PSI_EDGE_LIMIT = 200_000


@dataclass(frozen=True)
class PlanRow:
    """One sweep point. Exactly one of ``p`` and ``p_times_tmeet`` is set;
    the latter picks ``p = c / t_meet`` from a measured meeting time."""

    graph: str
    reps: int
    p: float | None = None
    p_times_tmeet: float | None = None
    tmeet_reps: int = 20_000

    def __post_init__(self):
        if (self.p is None) == (self.p_times_tmeet is None):
            raise ValueError("set exactly one of p and p_times_tmeet")
        if self.reps < 1:
            raise ValueError("reps must be positive")


@dataclass
class SweepResult:
    rows: list[dict] = field(default_factory=list)

    def column(self, name):
        return [r[name] for r in self.rows]

    def select(self, **match):
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]


def _sigma(kernel, p, S):
    """``(sigma_sq, source, var_psi or None)`` by priority: oracle, closed form, samples."""
    n = kernel.n
    if n <= exact.DEFAULT_MAX_N:
        d = exact.exact_gamma(NvmParams(kernel, p))
        return d.sigma_sq, "exact", exact.exact_psi_variance(d)
    if kernel.family == "complete":
        s = exact.complete_exact_summary(n, p)
        return s["sigma_sq"], "exact-complete", s["var_psi"]
    if kernel.family == "cycle":
        return analytics.cycle_sigma_sq(n, p), "closed-form", None
    return float(np.mean((S - 0.5) ** 2)), "dual-sample", None


def run_row(row: PlanRow, seed: int, index: int, thresholds: analytics.VerdictThresholds) -> dict:
    """Evaluate one plan row; failures are reported in the ``error`` column."""
    out = dict.fromkeys(COLUMNS, "")
    out.update(graph=row.graph, reps=row.reps)
    try:
        rng = stream(seed, index)
        kernel = build_kernel(row.graph)
        p = row.p
        if p is None:
            t_meet = walks.meeting_time(kernel, row.tmeet_reps, rng).value
            p = min(1.0, row.p_times_tmeet / t_meet)
        params = NvmParams(kernel, p)
        with_psi = kernel.indices.size <= PSI_EDGE_LIMIT
        out_s = dual.sample_S(params, row.reps, rng, with_psi=with_psi, timed=False)
        S, Psi = out_s if with_psi else (out_s, None)
        sigma_sq, src, var_psi = _sigma(kernel, p, S)
        if var_psi is None and with_psi and row.reps > 1:
            var_psi = float(Psi.var(ddof=1))
        verdict = analytics.bernoulli_verdict(S, sigma=math.sqrt(sigma_sq), thresholds=thresholds)
        out.update(
            n=kernel.n, p=p, sigma_sq=sigma_sq, sigma_src=src, sigma_hat_sq=verdict.sigma_hat_sq,
            ks=verdict.ks_to_gaussian, endpoint_mass=verdict.endpoint_mass, verdict=verdict.verdict.value,
        )
        if var_psi is not None and sigma_sq > 0:
            out.update(analytics.stein_bracket(kernel, p, sigma_sq, var_psi).as_dict())
    except Exception as exc:  # a bad row must not sink the sweep
        log.warning("sweep row %d (%s) failed: %s", index, row.graph, exc)
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def sweep(plan, seed: int, threads: int = 1, thresholds: analytics.VerdictThresholds | None = None) -> SweepResult:
    """Run every row of ``plan``; row ``i`` draws from stream ``(seed, i)``.

    Parameters
    ----------
    plan : sequence of PlanRow
        Non-empty list of sweep points.
    seed : int
        Master seed.
    threads : int
        Rows evaluated concurrently (the compiled kernels release the GIL).

    Returns
    -------
    SweepResult
        Rows in plan order, keyed by :data:`COLUMNS`.
    """
    plan = list(plan)
    if not plan:
        raise ValueError("empty sweep plan")
    th = thresholds or analytics.VerdictThresholds()
    if threads <= 1:
        rows = [run_row(r, seed, i, th) for i, r in enumerate(plan)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda ir: run_row(ir[1], seed, ir[0], th), enumerate(plan)))
    return SweepResult(rows)


def _cycle(n):
    return f"cycle:{n}"


def _torus(L):
    return f"torus:{L}x{L}"


def preset(name: str) -> list[PlanRow]:
    """Built-in plans; see :data:`PRESETS` for the names."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return PRESETS[name]()


def _complete_transition():
    rows = []
    for n in (64, 256, 1024, 4096):
        rows.append(PlanRow(f"complete:{n}", 2000, p=min(1.0, 2.0 / math.sqrt(n))))  # p n -> inf
        rows.append(PlanRow(f"complete:{n}", 2000, p=n ** -1.5))  # p n -> 0
    return rows


def _cycle_transition():
    rows = []
    for n in (64, 256, 1024):
        rows.append(PlanRow(_cycle(n), 2000, p=10.0 / n**1.5))  # p n^2 -> inf
        rows.append(PlanRow(_cycle(n), 2000, p=n ** -2.5))  # p n^2 -> 0
    return rows


def _torus_transition():
    rows = []
    for L in (8, 16, 32):
        n = L * L
        rows.append(PlanRow(_torus(L), 2000, p=20.0 / (n * math.log(n))))
        rows.append(PlanRow(_torus(L), 2000, p=1.0 / (n * math.log(n) ** 2)))
    return rows


def _meeting_conjecture():
    rows = []
    for g in ("star:64", "star:256", "hypercube:6", "hypercube:8", "torus:8x8", "torus:16x16"):
        for c in (0.1, 10.0):
            rows.append(PlanRow(g, 2000, p_times_tmeet=c))
    return rows


PRESETS = {
    "complete-transition": _complete_transition,
    "cycle-transition": _cycle_transition,
    "torus2d-transition": _torus_transition,
    "meeting-conjecture": _meeting_conjecture,
    "complete-gaussian": lambda: [PlanRow(f"complete:{n}", 100_000, p=4.0 / math.sqrt(n)) for n in (64, 256, 1024)],
    "cycle-bernoulli": lambda: [PlanRow(_cycle(n), 2000, p=n ** -2.5) for n in (64, 256, 1024)],
    "cycle-gaussian": lambda: [PlanRow(_cycle(n), 20_000, p=10.0 / n**1.5) for n in (64, 256, 1024)],
    "torus-divergence": lambda: [
        PlanRow(_torus(L), 2000, p=q(L * L)) for L in (8, 16, 32)
        for q in (lambda n: 20.0 / (n * math.log(n)), lambda n: 1.0 / (n * math.log(n) ** 2))
    ],
}


def load_plan(path) -> list[PlanRow]:
    """Read a plan file (YAML or JSON list of rows).

    Each row has ``reps`` and either ``graph`` (a spec string) or ``family``
    and ``n``, plus ``p`` or ``p_times_tmeet``.
    """
    data = yaml.safe_load(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("rows", data.get("plan"))
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: plan must be a non-empty list of rows")
    rows = []
    for i, item in enumerate(data):
        try:
            graph = item.get("graph")
            if graph is None:
                graph = GraphSpec.from_config({k: item[k] for k in item if k in ("family", "n", "dims", "size")}).label
            rows.append(PlanRow(
                str(graph), int(item["reps"]),
                p=None if item.get("p") is None else float(item["p"]),
                p_times_tmeet=None if item.get("p_times_tmeet") is None else float(item["p_times_tmeet"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: bad plan row {i}: {exc}") from exc
    return rows


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def to_csv(result: SweepResult, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in result.rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def strictly_decreasing(values) -> bool:
    v = [float(x) for x in values]
    return all(a > b for a, b in zip(v, v[1:]))


def strictly_increasing(values) -> bool:
    v = [float(x) for x in values]
    return all(a < b for a, b in zip(v, v[1:]))
