"""Verification checks shared by ``nvm verify`` and the acceptance tests.

Every check returns a :class:`CheckResult` holding a pass flag, a one-line
summary and per-case details. Sample sizes scale with ``scale`` so the CLI can
offer a quick mode; the acceptance suite always runs at ``scale=1``.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import analytics, dual, exact, sweep, walks
from .forward import NvmParams
from .graphs import build_kernel
from .stats import chi2_pooled, expected_tv_noise, tv_distance
from .streams import stream

DUALITY_GRAPHS = ("cycle:4", "cycle:6", "complete:4", "star:5", "torus:3x3")
DUALITY_PS = (0.1, 0.5, 0.9)
SMALL_GRAPHS = DUALITY_GRAPHS + ("cycle:8", "complete:6", "star:7", "hypercube:3", "torus:3x4")
SMALL_PS = (0.01, 0.1, 0.3, 0.5, 0.9, 1.0)


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    summary: str
    details: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key} {self.title}: {self.summary}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _n(x, scale, floor=1000):
    return max(floor, int(round(x * scale)))


_ORACLE_CACHE: dict = {}


def oracle(graph: str, p: float) -> exact.ExactDistribution:
    key = (graph, p)
    if key not in _ORACLE_CACHE:
        _ORACLE_CACHE[key] = exact.exact_gamma(NvmParams(build_kernel(graph), p))
    return _ORACLE_CACHE[key]


def small_instances():
    return list(itertools.product(SMALL_GRAPHS, SMALL_PS))


@_timed
def duality(seed: int, scale: float = 1.0, tv_tol: float = 0.005, alpha: float = 0.01,
            noise_aware: bool = False) -> CheckResult:
    """Empirical law of dual samples against the exact stationary law.

    With ``noise_aware`` the TV tolerance is raised to 1.5 times the expected
    TV of an ideal sampler at the same sample size.
    """
    m = _n(10**6, scale)
    rows, ok = [], True
    for i, (g, p) in enumerate(itertools.product(DUALITY_GRAPHS, DUALITY_PS)):
        d = oracle(g, p)
        bits = dual.sample_many(d.params, m, stream(seed, 1, i))
        codes = bits.astype(np.int64) @ (1 << np.arange(d.n, dtype=np.int64))
        counts = np.bincount(codes, minlength=1 << d.n)
        tv = tv_distance(counts / m, d.gamma)
        floor = expected_tv_noise(d.gamma, m)
        tol = max(tv_tol, 1.5 * floor) if noise_aware else tv_tol
        _, _, pval = chi2_pooled(counts, d.gamma)
        good = tv < tol and pval > alpha
        ok &= good
        rows.append(dict(graph=g, p=p, tv=tv, tv_floor=floor, tv_tol=tol, chi2_p=pval, passed=good))
    bad = [f"{r['graph']}@{r['p']}" for r in rows if not r["passed"]]
    worst = max(rows, key=lambda r: r["tv"])
    summary = f"{len(rows) - len(bad)}/{len(rows)} cells, max TV {worst['tv']:.4f} ({worst['graph']}@{worst['p']})"
    if bad:
        summary += "; failing: " + ", ".join(bad)
    return CheckResult("C1", "duality exactness", ok, summary, rows)


@_timed
def mean_identity(seed: int, scale: float = 1.0) -> CheckResult:
    m = _n(10**5, scale)
    rows, ok = [], True
    worst = 0.0
    for g, p in small_instances():
        worst = max(worst, abs(oracle(g, p).mean - 0.5))
    ok &= worst <= 1e-12
    for i, (g, p) in enumerate(itertools.product(DUALITY_GRAPHS, DUALITY_PS)):
        S = dual.sample_S(NvmParams(build_kernel(g), p), m, stream(seed, 2, i))
        se = S.std(ddof=1) / math.sqrt(m)
        z = (S.mean() - 0.5) / se
        good = abs(z) <= 3
        ok &= good
        rows.append(dict(graph=g, p=p, mean=float(S.mean()), se=float(se), z=float(z), passed=good))
    zmax = max(abs(r["z"]) for r in rows)
    return CheckResult("C2", "mean identity", ok, f"oracle |E(S)-1/2| <= {worst:.1e}; dual max |z| = {zmax:.2f}", rows)


@_timed
def cycle_closed_form(seed: int = 0, scale: float = 1.0) -> CheckResult:
    rows = []
    for n in range(3, 13):
        for p in (0.01, 0.1, 0.5, 0.9, 1.0):
            d = exact.exact_gamma(NvmParams(build_kernel(f"cycle:{n}"), p))
            err = abs(d.sigma_sq - analytics.cycle_sigma_sq(n, p))
            rows.append(dict(n=n, p=p, oracle=d.sigma_sq, err=err))
    worst = max(r["err"] for r in rows)
    return CheckResult("C3", "cycle closed form", worst <= 1e-10, f"max |oracle - closed form| = {worst:.2e}", rows)


@_timed
def variance_bounds(seed: int = 0, scale: float = 1.0) -> CheckResult:
    rows, ok = [], True
    cases = [(g, p, oracle(g, p).sigma_sq, "oracle") for g, p in small_instances()]
    cases += [(f"cycle:{n}", p, analytics.cycle_sigma_sq(n, p), "closed-form")
              for n in (16, 64, 256) for p in (0.001, 0.01, 0.1, 0.5, 1.0)]
    t_hits = {}
    for g, p, s2, src in cases:
        k = build_kernel(g)
        if g not in t_hits:
            t_hits[g] = walks.hitting_time(k).value
        b = analytics.variance_lower_bounds(k, p, t_hits[g] if p <= 0.5 else None)
        good = b.holds_for(s2)
        ok &= good
        rows.append(dict(graph=g, p=p, sigma_sq=s2, src=src, iid=b.iid, hitting=b.hitting, passed=good))
    margin = min(r["sigma_sq"] / max(r["iid"], r["hitting"] or 0.0) for r in rows)
    return CheckResult("C4", "variance lower bounds", ok, f"{len(rows)} instances, min sigma^2 / bound = {margin:.4f}", rows)


@_timed
def psi_bound(seed: int = 0, scale: float = 1.0) -> CheckResult:
    rows, ok = [], True
    for g, p in small_instances():
        d = oracle(g, p)
        v = exact.exact_psi_variance(d)
        bound = analytics.psi_variance_bound(d.params.kernel, d.sigma_sq)
        good = v <= bound * (1 + 1e-12)
        ok &= good
        rows.append(dict(graph=g, p=p, var_psi=v, bound=bound, passed=good))
    ratio = max(r["var_psi"] / r["bound"] for r in rows)
    return CheckResult("C5", "Var(Psi) bound", ok, f"max Var(Psi) / bound = {ratio:.4f}", rows)


@_timed
def contraction(seed: int = 0, scale: float = 1.0) -> CheckResult:
    rows = []
    for g, p in small_instances():
        r = exact.contraction_residual(NvmParams(build_kernel(g), p))
        rows.append(dict(graph=g, p=p, residual=r))
    worst = max(r["residual"] for r in rows)
    return CheckResult("C6", "one-step contraction", worst <= 1e-12, f"max per-state residual = {worst:.2e}", rows)


@_timed
def sigma_dual_identity(seed: int, scale: float = 1.0) -> CheckResult:
    m = _n(10**5, scale)
    cases = [("cycle:8", 0.3, analytics.cycle_sigma_sq(8, 0.3), "closed-form"),
             ("complete:6", 0.5, oracle("complete:6", 0.5).sigma_sq, "oracle")]
    rows, ok = [], True
    for i, (g, p, target, src) in enumerate(cases):
        est = dual.sigma_sq_via_dual(NvmParams(build_kernel(g), p), m, stream(seed, 7, i))
        z = (est.value - target) / est.se
        good = abs(z) <= 4
        ok &= good
        rows.append(dict(graph=g, p=p, estimate=est.value, se=est.se, target=target, src=src, z=z, passed=good))
    return CheckResult("C7", "sigma^2 dual identity", ok,
                       ", ".join(f"{r['graph']} z={r['z']:+.2f}" for r in rows), rows)


@_timed
def gambler(seed: int, scale: float = 1.0) -> CheckResult:
    m = _n(10**6, scale)
    rows, ok = [], True
    for i, (n, k, p) in enumerate(((10, 3, 0.2), (20, 10, 0.05), (8, 1, 0.5))):
        est = walks.gambler_mc(k, n, p, m, stream(seed, 8, i))
        f = walks.gambler_gf(k, n, p)
        z = (est.value - f) / est.se
        good = abs(z) <= 3
        ok &= good
        rows.append(dict(n=n, k=k, p=p, formula=f, estimate=est.value, se=est.se, z=z, passed=good))
    return CheckResult("C8", "gambler generating function", ok,
                       ", ".join(f"({r['n']},{r['k']},{r['p']}) z={r['z']:+.2f}" for r in rows), rows)


@_timed
def h0_inequality(seed: int, scale: float = 1.0, quads: int = 20) -> CheckResult:
    m = _n(10**5, scale)
    rows, ok = [], True
    for gi, (g, p) in enumerate(itertools.product(("cycle:6", "complete:5"), (0.2, 0.5))):
        d = oracle(g, p)
        rng = stream(seed, 9, gi)
        for j in range(quads):
            x, u, v, y = (int(a) for a in rng.choice(d.n, size=4, replace=False))
            h0 = max(0.0, exact.exact_h(d, u, v, x, y))
            tot = dual.four_particle_orderings(d.params, (x, u, v, y), m, rng).total()
            good = h0 <= tot.value + 4 * tot.se
            ok &= good
            rows.append(dict(graph=g, p=p, quad=(x, u, v, y), h0=h0, rhs=tot.value, se=tot.se, passed=good))
    slack = min(r["rhs"] + 4 * r["se"] - r["h0"] for r in rows)
    return CheckResult("C9", "h0 four-meeting bound", ok, f"{len(rows)} quadruples, min slack = {slack:.4f}", rows)


def _rows_or_errors(res):
    errs = [r["error"] for r in res.rows if r["error"]]
    return errs


def _error_result(key, title, res, errs):
    return CheckResult(key, title, False, f"{len(errs)} sweep row(s) failed: {errs[0]}", res.rows)


@_timed
def phase_kn(seed: int, scale: float = 1.0) -> CheckResult:
    plan = [sweep.PlanRow(r.graph, _n(r.reps, scale), p=r.p) for r in sweep.preset("complete-gaussian")]
    res = sweep.sweep(plan, seed)
    if errs := _rows_or_errors(res):
        return _error_result("C10a", "K_n Gaussian trend", res, errs)
    ks = res.column("ks")
    ok = sweep.strictly_decreasing(ks)
    return CheckResult("C10a", "K_n Gaussian trend", ok, "KS = " + ", ".join(f"{k:.4f}" for k in ks), res.rows)


@_timed
def phase_cycle_bernoulli(seed: int, scale: float = 1.0) -> CheckResult:
    plan = [sweep.PlanRow(r.graph, _n(r.reps, scale, 200), p=r.p) for r in sweep.preset("cycle-bernoulli")]
    res = sweep.sweep(plan, seed)
    if errs := _rows_or_errors(res):
        return _error_result("C10b", "cycle Bernoulli trend", res, errs)
    s2 = res.column("sigma_hat_sq")
    mass = res.rows[-1]["endpoint_mass"]
    ok = sweep.strictly_increasing(s2) and all(v <= 0.25 for v in s2) and mass > 0.9
    return CheckResult("C10b", "cycle Bernoulli trend", ok,
                       "sigma_hat^2 = " + ", ".join(f"{v:.4f}" for v in s2) + f"; endpoint mass at n=1024 = {mass:.4f}",
                       res.rows)


@_timed
def phase_cycle_gaussian(seed: int, scale: float = 1.0) -> CheckResult:
    plan = [sweep.PlanRow(r.graph, _n(r.reps, scale), p=r.p) for r in sweep.preset("cycle-gaussian")]
    res = sweep.sweep(plan, seed)
    if errs := _rows_or_errors(res):
        return _error_result("C10c", "cycle Gaussian trend", res, errs)
    ks = res.column("ks")
    ok = sweep.strictly_decreasing(ks)
    return CheckResult("C10c", "cycle Gaussian trend", ok, "KS = " + ", ".join(f"{k:.4f}" for k in ks), res.rows)


@_timed
def phase_torus(seed: int, scale: float = 1.0) -> CheckResult:
    plan = [sweep.PlanRow(r.graph, _n(r.reps, scale, 200), p=r.p) for r in sweep.preset("torus-divergence")]
    res = sweep.sweep(plan, seed)
    if errs := _rows_or_errors(res):
        return _error_result("C10d", "torus verdict divergence", res, errs)
    hi, lo = res.rows[-2], res.rows[-1]
    ok = hi["verdict"] == analytics.Verdict.GAUSSIAN.value and lo["verdict"] == analytics.Verdict.BERNOULLI.value
    summary = (f"L=32: p=20/(n log n) -> {hi['verdict']} (KS {hi['ks']:.4f}), "
               f"p=1/(n log^2 n) -> {lo['verdict']} (mass {lo['endpoint_mass']:.3f}, var {lo['sigma_hat_sq']:.4f})")
    return CheckResult("C10d", "torus verdict divergence", ok, summary, res.rows)


@_timed
def hitting_time_theorem(seed: int, scale: float = 1.0) -> CheckResult:
    m = _n(10**7, scale)
    rep = walks.hitting_time_theorem_check(3, 41, m, stream(seed, 11))
    ok = rep.max_z < 5
    return CheckResult("C11", "hitting-time theorem", ok,
                       f"max deviation {rep.max_deviation:.2e}, max |z| = {rep.max_z:.2f}",
                       [dict(t=int(t), lhs=float(a), rhs=float(b), se=float(s))
                        for t, a, b, s in zip(rep.t, rep.lhs, rep.rhs, rep.se)])


@_timed
def torus_tail(seed: int, scale: float = 1.0) -> CheckResult:
    m = _n(10**6, scale)
    rows = walks.torus_meet_tail_check(build_kernel("torus:8x8"), (0, 1, 4, 16), m, stream(seed, 12))
    ok = all(r.holds for r in rows)
    det = [dict(t=r.t, estimate=r.estimate, se=r.se, bound=r.bound, vacuous=r.vacuous) for r in rows]
    return CheckResult("C12", "torus meeting tail", ok,
                       ", ".join(f"t={r.t:g}: {r.estimate:.4f} <= {r.bound:.4f}" for r in rows), det)


PROPERTY_SUITE = (
    duality, mean_identity, cycle_closed_form, variance_bounds, psi_bound, contraction,
    sigma_dual_identity, gambler, h0_inequality, hitting_time_theorem, torus_tail,
)
PHASE_SUITE = (phase_kn, phase_cycle_bernoulli, phase_cycle_gaussian, phase_torus)


def run_suite(seed: int, quick: bool = False, phases: bool = False, progress=None) -> list[CheckResult]:
    """Run the property suite (and optionally the phase sweeps).

    ``quick`` shrinks sample sizes tenfold and judges duality against the
    sampling-noise floor.
    """
    scale = 0.1 if quick else 1.0
    out = []
    for fn in PROPERTY_SUITE + (PHASE_SUITE if phases else ()):
        kwargs = {"noise_aware": True} if (fn is duality and quick) else {}
        res = fn(seed, scale, **kwargs)
        out.append(res)
        if progress:
            progress(res)
    return out
