"""
Command-line front end.

Every command prints one JSON report (or a CSV table with ``--format csv``):

    {"schema_version", "command", "params", "seed", "results", "meta"}

Exit codes: 0 success, 2 validation error (the report then carries an
``error`` object), 3 an inequality was found violated under
``--expect-holds``, 64 usage error (unknown flag or command).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .measure import DomainError, ProbabilitySpace, RealFunction, load_function, log_p_norm, entropy
from .semigroup import Generator, GeneratorValidationError, spectral_gap

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_INVALID, EXIT_VIOLATED, EXIT_USAGE = 0, 2, 3, 64
GLOBALS = ("seed", "jobs", "out", "config", "expect_holds", "timing", "format")


class UsageError(Exception):
    pass


class ValidationError(Exception):
    pass


# --- serialization ---------------------------------------------------------------

def clean(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return clean(obj.to_dict())
    return str(obj)


def dumps(obj) -> str:
    # json uses repr for floats, the shortest string that round-trips
    return json.dumps(clean(obj), sort_keys=True, indent=1) + "\n"


def _fmt(x) -> str:
    x = clean(x)
    return x if isinstance(x, str) else json.dumps(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# --- input helpers -------------------------------------------------------------

def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: not valid JSON ({e})")


def load_generator(path, with_spec=False):
    """A generator file ``{"space", "L"}`` or a report that embeds one.

    With ``with_spec`` also return the chain spec recorded in such a report.
    """
    d = _read_json(path)
    spec = None
    if "results" in d and isinstance(d["results"], dict) and "generator" in d["results"]:
        spec = d["results"].get("spec")
        d = d["results"]["generator"]
    if "L" not in d or "space" not in d:
        raise ValidationError(f"{path}: expected keys 'space' and 'L'")
    G = Generator.from_dict(d)
    return (G, spec) if with_spec else G


def _logsob_constant(G, spec, args):
    """1-logSob constant for the mixing bound, with where it came from."""
    from .chains import ChainSpec, known_constant_bounds
    from .logsob import estimate_constant

    if args.C is not None:
        return args.C, "user"
    if spec is not None:
        kb = known_constant_bounds(ChainSpec(spec["kind"], spec["params"]))
        # a p-logSob bound with p >= 1 also bounds the 1-logSob constant
        if kb is not None and kb["upper"] is not None and kb["p"] >= 1:
            return kb["upper"], "literature-upper"
    e = estimate_constant(G, 1.0, seed=args.seed, jobs=args.jobs)
    return e.c_hat, "estimated"


def _load_set(path) -> list:
    d = _read_json(path)
    if isinstance(d, dict):
        d = d.get("indices", d.get("set"))
    if not isinstance(d, list):
        raise ValidationError(f"{path}: expected a list of state indices")
    return [int(i) for i in d]


def _floats(text) -> list:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text) -> list:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ValidationError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _verdict(v):
    return {"status": v.status, "violated": v.violated, "deficit": v.deficit,
            "query": v.query.to_dict(), "witness": v.witness.values.tolist(),
            "restarts": v.restarts, "trace": [[k, x] for k, x in v.trace]}


def _estimate(e):
    return {"p": e.p, "c_hat": e.c_hat, "method": e.method, "restarts": e.restarts,
            "witness": None if e.witness is None else e.witness.values.tolist(),
            "trace_digest": e.trace_digest()}


# --- commands --------------------------------------------------------------------

def cmd_space(args):
    if args.action == "uniform":
        _need(args, "n")
        sp = ProbabilitySpace.uniform(args.n)
    elif args.action == "two-point":
        _need(args, "alpha")
        sp = ProbabilitySpace.two_point(args.alpha)
    else:
        _need(args, "file")
        d = _read_json(args.file)
        sp = ProbabilitySpace.from_dict(d.get("space", d))
    res = {"space": sp.to_dict(), "size": sp.size, "min_atom": float(sp.mu.min())}
    if args.fn is not None:
        f = load_function(args.fn, sp)
        res["mean"] = f.mean()
        if args.p is not None:
            res["log_norm"] = log_p_norm(f, args.p)
            res["norm"] = math.exp(res["log_norm"])
        if f.positive:
            res["entropy"] = entropy(f)
    return res, None


CHAIN_ALIASES = {"qq-infinity": "qq-infinity-truncated"}


def _chain_spec(args):
    from .chains import ChainSpec

    kind = CHAIN_ALIASES.get(args.kind, args.kind)
    P = {}
    for key, dest in (("n", "n"), ("r", "r"), ("m", "m"), ("vertices", "vertices"),
                      ("beta", "beta"), ("h", "h"), ("boundary", "boundary"), ("rates", "rates"),
                      ("lam", "lam"), ("N", "trunc"), ("max_trees", "max_trees")):
        v = getattr(args, dest, None)
        if v is not None:
            P[key] = v
    if args.weights is not None:
        P["weights"] = _floats(args.weights)
    if args.shape is not None:
        P["shape"] = _ints(args.shape)
    if args.edges is not None:
        P["edges"] = [list(e) for e in json.loads(args.edges)]
    return ChainSpec(kind, P)


def cmd_chains(args):
    from .chains import TrajectorySampler, build, known_constant_bounds, sample_path

    spec = _chain_spec(args)
    res = {"spec": spec.to_dict()}
    if args.action == "build":
        G = build(spec)
        res.update({"generator": G.to_dict(), "states": G.size, "gap": spectral_gap(G)})
    elif args.action == "info":
        G = build(spec)
        mu = G.space.mu
        flux = mu[:, None] * G.L
        res.update({"states": G.size, "gap": spectral_gap(G),
                    "detailed_balance_residual": float(np.abs(flux - flux.T).max()),
                    "known_bounds": known_constant_bounds(spec)})
    else:
        _need(args, "t")
        sampler = TrajectorySampler(spec, args.seed)
        obs = {}
        if spec.kind == "qq-infinity-truncated":
            obs["occupancy"] = float
        elif spec.kind == "glauber-ising":
            obs["magnetization"] = lambda s: float(np.mean(s))
        out = sample_path(sampler, args.t, observables=obs, max_jumps=args.max_jumps)
        out.pop("visits", None)
        res.update(out)
    return res, None


def cmd_logsob(args):
    from .logsob import (estimate_constant, logsob_evaluate, monotonicity_audit,
                         poincare_constant, zero_logsob_constant)

    _need(args, "gen")
    G = load_generator(args.gen)
    if args.action == "estimate":
        _need(args, "p")
        e = estimate_constant(G, args.p, restarts=args.restarts, seed=args.seed, jobs=args.jobs)
        return _estimate(e), None
    if args.action == "evaluate":
        _need(args, "p", "fn")
        f = load_function(args.fn, G.space)
        ev = logsob_evaluate(G, args.p, f)
        return {"p": ev.p, "entropy_side": ev.entropy_side, "dirichlet_side": ev.dirichlet_side,
                "ratio": ev.ratio}, None
    if args.action == "poincare":
        return {"poincare": poincare_constant(G), "gap": spectral_gap(G),
                "zero_logsob": zero_logsob_constant(G)}, None
    grid = _floats(args.grid) if args.grid else [0.0, 0.5, 1.0, 1.5, 2.0]
    a = monotonicity_audit(G, grid, restarts=args.restarts, seed=args.seed)
    chat = [e.c_hat for e in a["estimates"]]
    return {"grid": a["grid"], "estimates": [_estimate(e) for e in a["estimates"]],
            "nondecreasing": bool(all(x <= y * (1 + 1e-9) for x, y in zip(chat, chat[1:]))),
            "checks": a["checks"], "violations": [list(v) for v in a["violations"]],
            "skipped": a["skipped"]}, not a["violations"]


def cmd_sv(args):
    from .logsob import sv_check
    from .semigroup import random_generator

    if args.action == "check":
        _need(args, "gen", "g", "p", "q")
        G = load_generator(args.gen)
        g = load_function(args.g, G.space)
        lhs, rhs, ok = sv_check(G, g.values, args.p, args.q)
        return {"lhs": lhs, "rhs": rhs, "holds": ok}, ok
    _need(args, "trials")
    worst, bad = math.inf, 0
    for k in range(args.trials):
        rng = np.random.default_rng([args.seed, k])
        n = int(rng.integers(2, args.max_states + 1))
        G = random_generator(n, rng, density=rng.uniform(0.3, 1.0))
        g = np.exp(rng.uniform(-3, 3, n))
        q, p = np.sort(rng.uniform(0, 2, 2))
        if q <= 0 or q == p:
            continue
        lhs, rhs, ok = sv_check(G, g, p, q)
        worst = min(worst, lhs - rhs)
        bad += not ok
    return {"trials": args.trials, "violations": bad, "min_slack": worst}, bad == 0


DIRECTIONS = {"rev": "reverse", "reverse": "reverse", "fwd": "forward", "forward": "forward"}


def cmd_hyper(args):
    from .hypercon import HyperQuery, critical_time, eta, theta, threshold, verify

    if args.action == "threshold":
        _need(args, "family", "p", "q")
        return {"family": args.family, "value": threshold(args.family, args.p, args.q, args.C)}, None
    if args.action == "theta":
        _need(args, "q")
        return {"theta": theta(args.q), "eta": eta(args.q)}, None
    _need(args, "gen", "dir", "p", "q")
    G = load_generator(args.gen)
    direction = DIRECTIONS[args.dir]
    restarts = 64 if args.restarts is None else args.restarts
    if args.action == "verify":
        _need(args, "t")
        v = verify(G, HyperQuery(direction, args.p, args.q, args.t), restarts=restarts,
                   seed=args.seed, jobs=args.jobs)
        return _verdict(v), not v.violated
    t_star, bracket = critical_time(G, direction, args.p, args.q, restarts=restarts,
                                    seed=args.seed, jobs=args.jobs)
    return {"t_star": t_star, "bracket": list(bracket)}, None


def cmd_mixing(args):
    from . import mixing as mx

    if args.action == "bound":
        _need(args, "C", "a", "b", "t")
        res = {"bound": mx.two_set_bound(args.C, args.a, args.b, args.t)}
        if args.D is not None and args.eps is not None:
            pa, pb = math.exp(-args.a ** 2 / 2), math.exp(-args.b ** 2 / 2)
            res["classical"] = mx.classical_bounds(args.D, args.eps, pa, pb, args.t)
        if args.tau is not None:
            res["product_improved"] = mx.product_improved_bound(args.tau, args.a, args.b)
        return res, None
    if args.action == "correlated":
        _need(args, "eps")
        if args.alpha is not None:
            try:
                return {"coupling": "kernel", "bound": mx.correlated_set_bound("kernel", args.eps, alpha=args.alpha)}, None
            except mx.NoBoundError as e:
                return {"coupling": "kernel", "bound": None, "no_bound": str(e)}, None
        _need(args, "rho")
        res = {"coupling": "rho", "bound": mx.correlated_set_bound("rho", args.eps, rho=args.rho),
               "exponent": mx.rho_exponent(args.rho), "sandwich": list(mx.exponent_sandwich(args.rho))}
        if args.kappa is not None:
            res["improved"] = mx.correlated_set_bound("rho", args.eps, rho=args.rho, kappa=args.kappa)
        return res, None
    _need(args, "gen", "A", "B")
    G, spec = load_generator(args.gen, with_spec=True)
    A, B = _load_set(args.A), _load_set(args.B)
    C, C_source = _logsob_constant(G, spec, args)
    if args.action == "exact":
        _need(args, "t")
        inst = mx.TwoSetInstance(G, tuple(A), tuple(B), args.t)
        res = {"pi_A": inst.pi_a, "pi_B": inst.pi_b, "a": inst.a, "b": inst.b,
               "exact": inst.exact(), "bound": inst.bound(C), "C": C, "C_source": C_source}
        res["holds"] = res["exact"] >= res["bound"] - 1e-12
        if args.mc:
            res["mc"] = mx.mc_joint(G, A, B, args.t, args.mc, seed=args.seed, jobs=args.jobs)
        return res, res["holds"]
    _need(args, "times")
    rows = mx.sweep(G, A, B, _floats(args.times), C, trials=args.mc or 0, seed=args.seed, jobs=args.jobs)
    ok = all(r[2] >= r[1] - 1e-12 for r in rows)
    return {"header": ["t", "bound", "exact", "mc_lo", "mc_hi"], "rows": rows, "C": C,
            "C_source": C_source, "holds": ok}, ok


def cmd_correlated(args):
    from . import mixing as mx

    if args.action == "counterexample":
        return mx.zero_atom_counterexample(args.n or 1), None
    _need(args, "n")
    space = ProbabilitySpace.from_weights(_floats(args.weights)) if args.weights else ProbabilitySpace.uniform(2)
    if args.alpha is not None:
        base = np.array(mx.ZERO_ATOM_KERNEL) if args.base == "zero-atom" else np.eye(space.size)[::-1]
        K = mx.kernel_with_alpha(space.mu, base, args.alpha)
        inst = mx.CorrelatedProductInstance(space, args.n, "kernel", K=K)
    else:
        _need(args, "rho")
        inst = mx.CorrelatedProductInstance(space, args.n, "rho", rho=args.rho)
    if args.action == "check":
        r = mx.exhaustive_correlated_check(inst)
        r["instance"] = inst.to_dict()
        return r, r["violations"] == 0
    _need(args, "count")
    x, y = mx.sample_pairs(inst, args.count, np.random.default_rng([args.seed, 0]))
    return {"instance": inst.to_dict(), "equal_fraction": float(np.mean(x == y)),
            "expected_equal_fraction": float(np.trace(inst.joint1())),
            "x_marginal": np.bincount(x.ravel(), minlength=space.size) / x.size,
            "y_marginal": np.bincount(y.ravel(), minlength=space.size) / y.size}, None


def cmd_arrow(args):
    from . import social_choice as sc

    if args.action == "delta":
        _need(args, "eps", "alpha", "C")
        return {"delta": sc.delta_for_epsilon(args.eps, args.alpha, args.C),
                "log_delta": sc.log_delta_for_epsilon(args.eps, args.alpha, args.C)}, None
    if args.action == "influence":
        _need(args, "fn", "i")
        f = sc.load_cube_function(args.fn, bias=args.bias)
        res = {"i": args.i, "influence": sc.influence(f, args.i),
               "variance_influence": sc.variance_influence(f, args.i), "parseval_gap": sc.parseval_gap(f)}
        if args.d is not None:
            res["low_degree_influence"] = sc.low_degree_influence(f, args.i, args.d)
        return res, None
    _need(args, "law")
    d = _read_json(args.law)
    law = sc.RankingDistribution.from_dict(d)
    if args.action == "px":
        _need(args, "f1", "f2", "f3")
        fs = [sc.load_cube_function(p) for p in (args.f1, args.f2, args.f3)]
        res = sc.paradox_probability(*fs, law, mc=args.mc, seed=args.seed)
        res["alpha"] = law.alpha
        return res, None
    _need(args, "f1", "f2")
    f1, f2 = sc.load_cube_function(args.f1), sc.load_cube_function(args.f2)
    r = sc.pivotal_intersection_exact(f1, f2, law, args.i or 1, args.j or 2)
    return r, r["holds"]


def cmd_nicd(args):
    from . import nicd as nc

    _need(args, "m", "n", "rho")
    if args.action == "power":
        f = (np.arange(args.m ** args.n) < args.m ** args.n // 2).astype(float)
        return nc.power_bound_check(f, args.m, args.n, args.rho, range(2, (args.k or 64) + 1)), None
    _need(args, "k")
    proto = nc.Protocol(args.m, args.n, args.protocol, coordinate=args.coordinate or 1)
    if args.action == "exact":
        cfg = nc.NicdConfig(args.m, args.n, args.k, args.rho, seed=args.seed)
        r = nc.agreement_probability(cfg, proto, method="exact")
        r["holder_bound"] = nc.holder_bound(cfg, proto)
        return r, r["estimate"] <= r["holder_bound"] + 1e-12
    ks = _ints(args.ks) if args.ks else list(range(2, args.k + 1))
    trials = args.trials or 100_000
    cfg = nc.NicdConfig(args.m, args.n, max(ks), args.rho, trials, args.seed)
    nc._require_balanced([proto], args.seed)
    counts = nc.mc_agreement_prefixes(cfg, proto, jobs=args.jobs)
    rows = []
    for k in ks:
        lo, hi = nc._wilson(int(counts[k - 1]), trials)
        rows.append([k, counts[k - 1] / trials, lo, hi])
    if args.rho > 0:
        C = nc.calibrate_envelope(rows[0][1], args.m, args.rho, ks[0])
        for r in rows:
            r.append(float(nc.upper_bound_envelope(args.m, args.rho, r[0], C)))
    else:
        for r in rows:
            r.append(math.nan)
    return {"header": ["k", "estimate", "ci_lo", "ci_hi", "envelope"], "rows": rows,
            "slope": nc.loglog_slope(ks, [r[1] for r in rows]), "protocol": proto.to_dict(),
            "trials": trials}, None


COMMANDS = {"space": cmd_space, "chains": cmd_chains, "logsob": cmd_logsob, "sv": cmd_sv,
            "hyper": cmd_hyper, "mixing": cmd_mixing, "correlated": cmd_correlated,
            "arrow": cmd_arrow, "nicd": cmd_nicd}


# --- parser ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        if "unrecognized arguments" in message or "invalid choice" in message:
            raise UsageError(f"{self.prog}: {message}")
        raise ValidationError(message)


def _globals(p, top):
    d = None if top else argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=d, help="base seed (fresh if omitted)")
    p.add_argument("--jobs", type=int, default=d, help="worker threads (default: all cores)")
    p.add_argument("--out", default=d, help="write the report here instead of stdout")
    p.add_argument("--config", default=d, help="key=value or JSON file merged under the flags")
    p.add_argument("--expect-holds", action="store_true", default=False if top else argparse.SUPPRESS,
                   help="exit 3 if an inequality is found violated")
    p.add_argument("--timing", action="store_true", default=False if top else argparse.SUPPRESS,
                   help="record runtime_ms (makes reports non-reproducible)")
    p.add_argument("--format", choices=("json", "csv"), default="json" if top else argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="revhyp", description=__doc__.strip().splitlines()[0])
    _globals(parser, True)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def leaf(group, name, actions, *adders):
        p = group.add_parser(name)
        _globals(p, False)
        p.add_argument("action", choices=actions)
        for a in adders:
            a(p)
        return p

    F = float

    def opt(*names, **kw):
        def add(p):
            p.add_argument(*names, default=None, **kw)
        return add

    leaf(sub, "space", ("uniform", "two-point", "check"),
         opt("--n", type=int), opt("--alpha", type=F), opt("--file"), opt("--fn"), opt("--p", type=F))

    p = leaf(sub, "chains", ("build", "info", "sample"),
             opt("--n", type=int), opt("--r", type=int), opt("--m", type=int), opt("--weights"),
             opt("--vertices", type=int), opt("--edges"), opt("--shape"), opt("--beta", type=F),
             opt("--h", type=F), opt("--boundary"), opt("--rates"), opt("--lambda", dest="lam", type=F),
             opt("--trunc", type=int), opt("--max-trees", type=int), opt("--t", type=F),
             opt("--max-jumps", type=int))
    p.add_argument("kind")

    leaf(sub, "logsob", ("estimate", "audit-monotone", "evaluate", "poincare"),
         opt("--gen"), opt("--p", type=F), opt("--restarts", type=int), opt("--grid"), opt("--fn"))
    leaf(sub, "sv", ("check", "random"),
         opt("--gen"), opt("--g"), opt("--p", type=F), opt("--q", type=F), opt("--trials", type=int),
         lambda q: q.add_argument("--max-states", type=int, default=6))
    leaf(sub, "hyper", ("verify", "critical-time", "threshold", "theta"),
         opt("--gen"), opt("--dir", choices=sorted(DIRECTIONS)), opt("--p", type=F), opt("--q", type=F),
         opt("--t", type=F), opt("--restarts", type=int), opt("--family"), opt("--C", type=F))
    leaf(sub, "mixing", ("bound", "exact", "sweep", "correlated"),
         opt("--C", type=F), opt("--a", type=F), opt("--b", type=F), opt("--t", type=F),
         opt("--D", type=F), opt("--eps", type=F), opt("--tau", type=F), opt("--gen"), opt("--A"),
         opt("--B"), opt("--times"), opt("--mc", type=int), opt("--rho", type=F), opt("--alpha", type=F),
         opt("--kappa", type=F))
    leaf(sub, "correlated", ("check", "sample", "counterexample"),
         opt("--n", type=int), opt("--rho", type=F), opt("--alpha", type=F), opt("--weights"),
         opt("--count", type=int), lambda q: q.add_argument("--base", choices=("swap", "zero-atom"), default="swap"))
    leaf(sub, "arrow", ("influence", "px", "pivotal", "delta"),
         opt("--fn"), opt("--i", type=int), opt("--j", type=int), opt("--bias", type=F), opt("--d", type=int),
         opt("--f1"), opt("--f2"), opt("--f3"), opt("--law"), opt("--mc", type=int),
         opt("--eps", type=F), opt("--alpha", type=F), opt("--C", type=F))
    leaf(sub, "nicd", ("simulate", "exact", "power"),
         opt("--m", type=int), opt("--n", type=int), opt("--k", type=int), opt("--ks"), opt("--rho", type=F),
         opt("--trials", type=int), opt("--coordinate", type=int),
         lambda q: q.add_argument("--protocol", choices=("plurality", "dictator"), default="plurality"))
    return parser


def _read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    if text.lstrip().startswith("{"):
        return json.loads(text)
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line without '=': {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_config(parser, argv, args):
    """Re-parse with config values as defaults so explicit flags win."""
    conf = _read_config(args.config)
    leaf = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in leaf._actions}
    defaults = {}
    for k, v in conf.items():
        if k not in known or k in ("help", "config"):
            raise ValidationError(f"unknown config key {k!r}")
        a = known[k]
        if isinstance(a, argparse._StoreTrueAction):
            defaults[k] = str(v).lower() in ("1", "true", "yes")
        elif a.type is not None and v is not None:
            defaults[k] = a.type(v)
        else:
            defaults[k] = v
    leaf.set_defaults(**defaults)
    return parser.parse_args(argv)


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "config", "timing", "format")}


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    """Parse, dispatch and return ``(exit_code, report_dict)``."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    command = None
    args = None
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        command = args.command
        if args.config:
            args = _apply_config(parser, argv, args)
        if args.seed is None:
            args.seed = secrets.randbits(63)
        if args.jobs is None:
            args.jobs = os.cpu_count() or 1
        if args.jobs < 1:
            raise ValidationError("--jobs must be at least 1")
        command = f"{args.command} {args.action}"
        t0 = time.perf_counter()
        results, holds = COMMANDS[args.command](args)
        runtime = (time.perf_counter() - t0) * 1e3 if args.timing else None
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE, None
    except (ValidationError, DomainError, GeneratorValidationError, ValueError, KeyError, TypeError) as e:
        rep = {"schema_version": SCHEMA_VERSION, "command": command,
               "params": _params(args) if args is not None else {}, "seed": getattr(args, "seed", None),
               "results": None, "meta": {"tool_version": __version__, "runtime_ms": None,
                                         "workers": getattr(args, "jobs", None)},
               "error": {"type": type(e).__name__, "message": str(e)}}
        _emit(dumps(rep), getattr(args, "out", None))
        return EXIT_INVALID, rep
    report = {"schema_version": SCHEMA_VERSION, "command": command, "params": _params(args),
              "seed": args.seed, "results": results,
              "meta": {"tool_version": __version__, "runtime_ms": runtime, "workers": args.jobs}}
    if args.format == "csv":
        if not isinstance(results, dict) or "rows" not in results:
            sys.stderr.write(f"{command} has no tabular output\n")
            return EXIT_USAGE, report
        _emit(to_csv(results["header"], results["rows"]), args.out)
    else:
        _emit(dumps(report), args.out)
    if args.expect_holds and holds is False:
        return EXIT_VIOLATED, report
    return EXIT_OK, report


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
