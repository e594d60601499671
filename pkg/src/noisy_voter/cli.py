"""Command-line front end: ``nvm <subcommand> ...``.

Every output starts with a ``#`` metadata line carrying the package version,
the master seed and a hash of the run configuration. No timestamps or host
details are written, so identical invocations give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__, analytics, checks, dual, exact, forward, sweep, walks
from .forward import NvmParams, OpinionConfig, ParameterError
from .graphs import GraphError, build_kernel
from .streams import stream

log = logging.getLogger("noisy_voter")

DUAL_BLOCK = 10_000  # samples per random stream in dual-sample
# arguments that never change the output bytes
_NEUTRAL = {"out", "threads", "verbose", "func"}


class CliError(Exception):
    pass


def config_hash(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NEUTRAL}
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header(args) -> str:
    seed = getattr(args, "seed", None)
    return f"# noisy_voter version={__version__} seed={seed} config_hash={config_hash(args)}"


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(args, columns, rows):
    with _open_out(args.out) as fh:
        fh.write(header(args) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_json(args, payload):
    doc = {"meta": {"version": __version__, "seed": getattr(args, "seed", None), "config_hash": config_hash(args)}}
    doc.update(payload)
    with _open_out(args.out) as fh:
        fh.write(header(args) + "\n")
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _params(args) -> NvmParams:
    return NvmParams(build_kernel(args.graph), args.p)


def cmd_simulate(args):
    params = _params(args)
    steps = args.steps if args.steps is not None else forward.burn_in(params)
    rows = []
    for r in range(args.replicas):
        rng = stream(args.seed, r)
        n = params.n
        if args.init == "zeros":
            init = OpinionConfig.zeros(n)
        elif args.init == "ones":
            init = OpinionConfig.ones(n)
        else:
            init = OpinionConfig.random(n, rng)
        cfg = forward.run(params, steps, init, rng)
        rows.append((r, args.seed, steps, cfg.s(params.kernel.pi), cfg.popcount))
    write_csv(args, ("replica", "seed", "steps", "S", "popcount"), rows)


def cmd_dual_sample(args):
    params = _params(args)
    blocks = math.ceil(args.reps / DUAL_BLOCK)
    rows = []
    for b in range(blocks):
        m = min(DUAL_BLOCK, args.reps - b * DUAL_BLOCK)
        bits = dual.sample_many(params, m, stream(args.seed, b), continuous=args.continuous, timed=False)
        if args.emit == "bits":
            rows.extend((b * DUAL_BLOCK + i, "".join(map(str, row))) for i, row in enumerate(bits))
        else:
            s = bits @ params.kernel.pi
            rows.extend((b * DUAL_BLOCK + i, v) for i, v in enumerate(s))
    write_csv(args, ("sample", "bits" if args.emit == "bits" else "S"), rows)


def cmd_exact(args):
    params = _params(args)
    d = exact.exact_gamma(params, max_n=args.max_n, method=args.method)
    if args.emit == "moments":
        mean, var, _ = exact.exact_moments(d)
        write_csv(args, ("graph", "n", "p", "E_S", "sigma_sq", "var_psi", "residual"),
                  [(args.graph, d.n, params.p, mean, var, exact.exact_psi_variance(d), d.residual)])
    elif args.emit == "spmf":
        values, masses = d.s_pmf
        write_json(args, {"graph": args.graph, "n": d.n, "p": params.p,
                          "s_values": values.tolist(), "masses": masses.tolist()})
    else:
        write_json(args, {"graph": args.graph, "n": d.n, "p": params.p, "encoding": "bit x of index = opinion of x",
                          "gamma": d.gamma.tolist(), "residual": d.residual})


def cmd_rw(args):
    what = args.what
    if what == "gambler":
        _need(args, "n", "k", "p")
        rng = stream(args.seed, 0)
        est = walks.gambler_mc(args.k, args.n, args.p, args.reps, rng)
        write_csv(args, ("n", "k", "p", "formula", "estimate", "se"),
                  [(args.n, args.k, args.p, walks.gambler_gf(args.k, args.n, args.p), est.value, est.se)])
        return
    if what == "htt":
        _need(args, "k")
        rep = walks.hitting_time_theorem_check(args.k, args.t_max, args.reps, stream(args.seed, 0))
        write_csv(args, ("t", "P_T0_eq_t", "k_over_t_P_Xt_0", "se"),
                  list(zip(rep.t.tolist(), rep.lhs, rep.rhs, rep.se)))
        return
    _need(args, "graph")
    kernel = build_kernel(args.graph)
    if what == "thit":
        h = walks.hitting_time(kernel, rng=stream(args.seed, 0))
        write_csv(args, ("graph", "n", "t_hit", "exact", "targets"), [(args.graph, kernel.n, h.value, h.exact, h.targets)])
    elif what == "tmeet":
        est = walks.meeting_time(kernel, args.reps, stream(args.seed, 0))
        write_csv(args, ("graph", "n", "t_meet", "se", "reps"), [(args.graph, kernel.n, est.value, est.se, est.reps)])
    elif what == "torustail":
        ts = [float(t) for t in args.ts.split(",")]
        rows = walks.torus_meet_tail_check(kernel, ts, args.reps, stream(args.seed, 0))
        write_csv(args, ("t", "estimate", "se", "bound", "holds", "vacuous"),
                  [(r.t, r.estimate, r.se, r.bound, r.holds, r.vacuous) for r in rows])


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise CliError(f"rw --what {args.what} needs --{' --'.join(m.replace('_', '-') for m in missing)}")


def cmd_sweep(args):
    if bool(args.preset) == bool(args.plan):
        raise CliError("give exactly one of --preset and --plan")
    plan = sweep.preset(args.preset) if args.preset else sweep.load_plan(args.plan)
    th = analytics.VerdictThresholds(eps=args.eps, ks_max=args.ks_max)
    res = sweep.sweep(plan, args.seed, threads=args.threads, thresholds=th)
    with _open_out(args.out) as fh:
        fh.write(sweep.to_csv(res, header(args)))


def cmd_verify(args):
    def show(res):
        print(res.line(), file=sys.stderr, flush=True)

    results = checks.run_suite(args.seed, quick=args.quick, phases=args.phases, progress=show)
    rows = [(r.key, r.title, "PASS" if r.passed else "FAIL", r.summary) for r in results]
    write_csv(args, ("check", "title", "status", "summary"), rows)
    return 0 if all(r.passed for r in results) else 1


def positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def probability(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid probability {text!r}") from None
    if not (0.0 < v <= 1.0):
        raise argparse.ArgumentTypeError(f"p must lie in (0, 1], got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nvm", description="Noisy voter model simulation and verification toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True, graph=True, prob=True):
        if graph:
            p.add_argument("--graph", required=True, help="cycle:N, torus:AxB, hypercube:D, complete:N, star:N, edges:PATH")
        if prob:
            p.add_argument("--p", type=probability, required=True, help="noise probability in (0, 1]")
        if seed:
            p.add_argument("--seed", type=int, required=True)
        p.add_argument("--out", default="-", help="output path, '-' for stdout")

    p = sub.add_parser("simulate", help="run the forward chain")
    common(p)
    p.add_argument("--steps", type=int, help="steps per replica (default: burn-in 8 n log n / p)")
    p.add_argument("--replicas", "--reps", dest="replicas", type=positive_int, default=1)
    p.add_argument("--init", choices=("random", "zeros", "ones"), default="random")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dual-sample", help="exact stationary samples from the dual")
    common(p)
    p.add_argument("--reps", type=positive_int, required=True)
    p.add_argument("--emit", choices=("s", "bits"), default="s")
    p.add_argument("--continuous", action="store_true", help="use the continuous-time clock")
    p.set_defaults(func=cmd_dual_sample)

    p = sub.add_parser("exact", help="exact stationary law on small graphs")
    common(p, seed=False)
    p.add_argument("--emit", choices=("gamma", "spmf", "moments"), default="moments")
    p.add_argument("--max-n", type=int, default=exact.DEFAULT_MAX_N)
    p.add_argument("--method", choices=("direct", "power"), default="direct")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("rw", help="random-walk quantities")
    p.add_argument("--what", choices=("thit", "tmeet", "gambler", "htt", "torustail"), required=True)
    p.add_argument("--graph")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reps", type=positive_int, default=100_000)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--p", type=probability)
    p.add_argument("--t-max", type=int, default=41)
    p.add_argument("--ts", default="0,1,4,16")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_rw)

    p = sub.add_parser("sweep", help="phase-transition sweeps")
    p.add_argument("--preset", choices=sorted(sweep.PRESETS))
    p.add_argument("--plan", help="YAML/JSON plan file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=positive_int, default=os.cpu_count() or 1)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--ks-max", type=float, default=0.05)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the property suite")
    p.add_argument("--quick", action="store_true", help="smaller samples, noise-calibrated duality check")
    p.add_argument("--phases", action="store_true", help="also run the phase-transition sweeps")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        rc = args.func(args)
    except (ParameterError, GraphError, CliError, exact.OracleSizeError, dual.AbsorptionCapError, ValueError) as exc:
        print(f"nvm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
