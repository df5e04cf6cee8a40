"""
A zoo of reversible chains: explicit generators for small instances and
jump samplers that work without a matrix.

Rate conventions
----------------
The walks driven by a uniformly chosen move (product walk, random and
top-to-random transpositions, Bernoulli-Laplace, spanning trees) jump at
total rate 1, so a proposed move happens after an Exp(1) wait.  Glauber
dynamics uses the per-site rates ``c(u, sigma)`` and the queue uses birth
rate ``lam`` and death rate ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .measure import DomainError, ProbabilitySpace
from .semigroup import (
    MATERIALIZE_CAP,
    Generator,
    TensorGenerator,
    TooLargeError,
    simple_generator,
)

KINDS = (
    "simple",
    "product-walk",
    "random-transposition",
    "top-to-random",
    "bernoulli-laplace",
    "spanning-tree-walk",
    "glauber-ising",
    "qq-infinity-truncated",
)

MAX_SPANNING_TREES = 12


class SamplerOnly(TooLargeError):
    """The instance is too large for an explicit generator; use a sampler."""


@dataclass(frozen=True)
class ChainSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown chain kind {self.kind!r}")
        _validate(self.kind, self.params)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    def state_count(self) -> int:
        k, P = self.kind, self.params
        if k == "simple":
            return len(_weights(P))
        if k == "product-walk":
            return len(_weights(P)) ** P["n"]
        if k in ("random-transposition", "top-to-random"):
            return math.factorial(P["n"])
        if k == "bernoulli-laplace":
            return math.comb(P["n"], P["r"])
        if k == "glauber-ising":
            return 2 ** int(np.prod(P["shape"]))
        if k == "qq-infinity-truncated":
            return P["N"] + 1
        return len(spanning_trees(P["vertices"], P["edges"], limit=None))


def _weights(P):
    if "weights" in P:
        w = np.asarray(P["weights"], dtype=float)
        return w / w.sum()
    return np.full(int(P.get("m", 2)), 1.0 / int(P.get("m", 2)))


def _validate(kind, P):
    def need(cond, msg):
        if not cond:
            raise DomainError(f"{kind}: {msg}")

    if kind in ("simple", "product-walk"):
        w = _weights(P)
        need(w.size >= 1 and (w > 0).all(), "factor weights must be positive")
        if kind == "product-walk":
            need(int(P.get("n", 0)) >= 1, "n >= 1")
    elif kind in ("random-transposition", "top-to-random"):
        need(int(P.get("n", 0)) >= 2, "n >= 2")
    elif kind == "bernoulli-laplace":
        n, r = int(P.get("n", 0)), int(P.get("r", 0))
        need(n >= 2 and 1 <= r < n, "need 1 <= r < n")
    elif kind == "spanning-tree-walk":
        need(int(P.get("vertices", 0)) >= 2, "at least two vertices")
        need(len(P.get("edges", ())) >= 1, "at least one edge")
    elif kind == "glauber-ising":
        shape = P.get("shape")
        need(shape is not None and all(int(s) >= 1 for s in shape), "box shape required")
        need(P.get("boundary", "free") in ("free", "+", "-"), "boundary is free, + or -")
        need(P.get("rates", "metropolis") in ("metropolis", "heat-bath"), "rates: metropolis or heat-bath")
        need(float(P.get("beta", 0.0)) >= 0, "beta >= 0")
    elif kind == "qq-infinity-truncated":
        need(float(P.get("lam", 0)) > 0, "lam > 0")
        need(1 <= int(P.get("N", 0)) <= 200, "truncation 1 <= N <= 200")


# --- explicit generators -----------------------------------------------------

def _from_moves(labels, mu, moves):
    """Generator from ``moves(state) -> iterable of (target, rate)``."""
    index = {s: i for i, s in enumerate(labels)}
    n = len(labels)
    L = np.zeros((n, n))
    for i, s in enumerate(labels):
        for target, rate in moves(s):
            j = index[target]
            if j != i:
                L[i, j] -= rate
    L[np.diag_indices(n)] = -L.sum(axis=1)
    space = ProbabilitySpace(tuple(labels), mu)
    return Generator(space, L)


def _transpose(perm, i, j):
    p = list(perm)
    p[i], p[j] = p[j], p[i]
    return tuple(p)


def spanning_trees(vertices: int, edges, limit: int | None = MAX_SPANNING_TREES):
    """All spanning trees as sorted tuples of edge indices (multi-edges allowed).

    Raises :class:`SamplerOnly` once more than ``limit`` trees are found.
    """
    edges = [tuple(e) for e in edges]
    trees = []
    for combo in itertools.combinations(range(len(edges)), vertices - 1):
        if _acyclic(vertices, [edges[k] for k in combo]):
            trees.append(combo)
            if limit is not None and len(trees) > limit:
                raise SamplerOnly(f"more than {limit} spanning trees")
    return trees


def _acyclic(vertices, es):
    parent = list(range(vertices))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in es:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def _ising_geometry(shape, boundary):
    """Neighbour lists inside the box and the fixed boundary field per site."""
    shape = tuple(int(s) for s in shape)
    sites = list(itertools.product(*[range(s) for s in shape]))
    index = {s: k for k, s in enumerate(sites)}
    bval = {"free": 0.0, "+": 1.0, "-": -1.0}[boundary]
    nbrs, field_b = [], np.zeros(len(sites))
    for s in sites:
        mine = []
        for axis in range(len(shape)):
            for step in (-1, 1):
                t = list(s)
                t[axis] += step
                t = tuple(t)
                if t in index:
                    mine.append(index[t])
                else:
                    field_b[index[s]] += bval
        nbrs.append(mine)
    return nbrs, field_b


def ising_log_weight(config, nbrs, field_b, beta, h):
    """``-beta sum_{uv} s_u s_v - h sum_u s_u``, boundary bonds included."""
    s = np.asarray(config, dtype=float)
    inner = sum(s[u] * s[v] for u in range(len(s)) for v in nbrs[u] if v > u)
    return -beta * (inner + float(s @ field_b)) - h * float(s.sum())


def ising_rate(config, u, nbrs, field_b, beta, h, rates="metropolis"):
    """Flip rate ``c(u, sigma)``; the exponent is ``log mu(sigma^u) - log mu(sigma)``."""
    su = config[u]
    local = sum(config[v] for v in nbrs[u]) + field_b[u]
    delta = 2.0 * h * su + 2.0 * beta * su * local
    if rates == "metropolis":
        return math.exp(min(delta, 0.0))
    return 1.0 / (1.0 + math.exp(-delta))


def build(spec: ChainSpec) -> Generator:
    """Explicit generator of a chain; :class:`SamplerOnly` above the state cap."""
    k, P = spec.kind, spec.params
    if k != "spanning-tree-walk" and spec.state_count() > MATERIALIZE_CAP:
        raise SamplerOnly(f"{spec.state_count()} states exceeds the cap of {MATERIALIZE_CAP}")
    if k == "simple":
        return simple_generator(ProbabilitySpace.from_weights(_weights(P)))
    if k == "product-walk":
        n = int(P["n"])
        f = simple_generator(ProbabilitySpace.from_weights(_weights(P)))
        return TensorGenerator([f] * n, [1.0 / n] * n).materialize()
    if k in ("random-transposition", "top-to-random"):
        n = int(P["n"])
        perms = list(itertools.permutations(range(n)))
        if k == "random-transposition":
            pairs = list(itertools.combinations(range(n), 2))
        else:
            pairs = [(0, j) for j in range(1, n)]
        rate = 1.0 / len(pairs)
        mu = np.full(len(perms), 1.0 / len(perms))
        return _from_moves(perms, mu, lambda s: ((_transpose(s, i, j), rate) for i, j in pairs))
    if k == "bernoulli-laplace":
        n, r = int(P["n"]), int(P["r"])
        sets = list(itertools.combinations(range(n), r))
        rate = 1.0 / (r * (n - r))

        def moves(A):
            rest = [j for j in range(n) if j not in A]
            for i in A:
                for j in rest:
                    yield tuple(sorted(set(A) - {i} | {j})), rate

        return _from_moves(sets, np.full(len(sets), 1.0 / len(sets)), moves)
    if k == "spanning-tree-walk":
        V, E = int(P["vertices"]), [tuple(e) for e in P["edges"]]
        trees = spanning_trees(V, E, limit=int(P.get("max_trees", MAX_SPANNING_TREES)))
        tree_set = set(trees)
        rate = 1.0 / (len(E) * (V - 1))

        def moves(T):
            for e in range(len(E)):
                for f in T:
                    cand = tuple(sorted(set(T) - {f} | {e}))
                    if len(cand) == V - 1 and cand in tree_set:
                        yield cand, rate

        return _from_moves(trees, np.full(len(trees), 1.0 / len(trees)), moves)
    if k == "glauber-ising":
        nbrs, fb = _ising_geometry(P["shape"], P.get("boundary", "free"))
        beta, h = float(P.get("beta", 0.0)), float(P.get("h", 0.0))
        rates = P.get("rates", "metropolis")
        configs = list(itertools.product((-1, 1), repeat=len(nbrs)))
        logw = np.array([ising_log_weight(c, nbrs, fb, beta, h) for c in configs])
        mu = np.exp(logw - logw.max())
        mu /= mu.sum()

        def moves(c):
            for u in range(len(c)):
                flipped = c[:u] + (-c[u],) + c[u + 1:]
                yield flipped, ising_rate(c, u, nbrs, fb, beta, h, rates)

        return _from_moves(configs, mu, moves)
    # truncated queue: birth lam below N, death k
    lam, N = float(P["lam"]), int(P["N"])
    ks = np.arange(N + 1)
    logw = ks * math.log(lam) - gammaln(ks + 1)
    mu = np.exp(logw - logw.max())
    mu /= mu.sum()
    # far tail underflows for small lam; keep it representable
    mu = np.maximum(mu, np.finfo(float).tiny)
    L = np.zeros((N + 1, N + 1))
    for kk in range(N + 1):
        if kk > 0:
            L[kk, kk - 1] = -kk
        if kk < N:
            L[kk, kk + 1] = -lam
        L[kk, kk] = -L[kk].sum()
    return Generator(ProbabilitySpace(tuple(range(N + 1)), mu), L)


def known_constant_bounds(spec: ChainSpec):
    """Literature bounds on a log-Sobolev constant, or ``None``.

    Returns a dict with ``p`` (which inequality), ``lower`` and ``upper``
    (``None`` when not available) and a short ``note``.
    """
    k, P = spec.kind, spec.params
    if k in ("random-transposition", "top-to-random"):
        n = int(P["n"])
        return {"p": 1, "lower": (n - 1) / 2, "upper": 2.0 * (n - 1), "note": "order n"}
    if k == "bernoulli-laplace":
        n, r = int(P["n"]), int(P["r"])
        return {"p": 1, "lower": r * (n - r) / (2 * n), "upper": 2.0 * r * (n - r) / n,
                "note": "r-sets of an n-set"}
    if k == "spanning-tree-walk":
        V, E = int(P["vertices"]), len(P["edges"])
        return {"p": 2, "lower": None, "upper": float(V * E), "note": "|V||E|"}
    if k == "glauber-ising":
        return {"p": 2, "lower": None, "upper": None,
                "note": "uniform bound exists under strong spatial mixing; value unspecified"}
    if k == "simple":
        return {"p": 1, "lower": None, "upper": 4.0, "note": "Ent(f) <= E(f, log f)"}
    if k == "product-walk":
        n = int(P["n"])
        return {"p": 1, "lower": None, "upper": 4.0 * n, "note": "tensorization, factor rate 1/n"}
    return None


def graph_walk(adjacency) -> Generator:
    """Simple random walk on a connected graph at total jump rate 1.

    ``L = I - D^-1 A``; the stationary measure is proportional to degree.
    """
    A = np.asarray(adjacency, dtype=float)
    deg = A.sum(axis=1)
    if A.shape[0] != A.shape[1] or not np.allclose(A, A.T) or np.any(deg <= 0):
        raise DomainError("need a symmetric adjacency matrix without isolated vertices")
    L = np.eye(A.shape[0]) - A / deg[:, None]
    return Generator(ProbabilitySpace.from_weights(deg), L)


def random_regular_walk(d: int, n: int, seed: int = 0, tries: int = 100) -> Generator:
    """Walk on a connected uniformly random ``d``-regular graph with ``n`` vertices."""
    import networkx as nx

    for k in range(tries):
        g = nx.random_regular_graph(d, n, seed=int(np.random.default_rng([seed, k]).integers(2**31)))
        if nx.is_connected(g):
            return graph_walk(nx.to_numpy_array(g, nodelist=range(n)))
    raise DomainError("no connected graph found")


# --- samplers -------------------------------------------------------------------

class TrajectorySampler:
    """Continuous-time jump sampler for a :class:`ChainSpec`.

    Works for every kind without building a matrix, so it also covers
    instances above the explicit-generator cap.
    """

    def __init__(self, spec: ChainSpec, seed: int = 0):
        self.spec = spec
        self.seed = int(seed)
        self._prep()

    def _prep(self):
        k, P = self.spec.kind, self.spec.params
        if k in ("simple", "product-walk"):
            self.w = _weights(P)
            self.n = 1 if k == "simple" else int(P["n"])
        elif k in ("random-transposition", "top-to-random"):
            n = int(P["n"])
            self.pairs = (list(itertools.combinations(range(n), 2)) if k == "random-transposition"
                          else [(0, j) for j in range(1, n)])
        elif k == "spanning-tree-walk":
            self.V = int(P["vertices"])
            self.E = [tuple(e) for e in P["edges"]]
        elif k == "glauber-ising":
            self.nbrs, self.fb = _ising_geometry(P["shape"], P.get("boundary", "free"))
            self.beta, self.h = float(P.get("beta", 0.0)), float(P.get("h", 0.0))
            self.rates = P.get("rates", "metropolis")

    def initial_state(self, rng):
        k, P = self.spec.kind, self.spec.params
        if k == "simple":
            return int(rng.choice(self.w.size, p=self.w))
        if k == "product-walk":
            return tuple(int(x) for x in rng.choice(self.w.size, size=self.n, p=self.w))
        if k in ("random-transposition", "top-to-random"):
            return tuple(int(x) for x in rng.permutation(int(P["n"])))
        if k == "bernoulli-laplace":
            return tuple(sorted(int(x) for x in rng.choice(int(P["n"]), size=int(P["r"]), replace=False)))
        if k == "spanning-tree-walk":
            # a uniform random spanning tree via Wilson's algorithm is overkill here;
            # start from the first tree found greedily and let the walk mix
            T = []
            for idx, e in enumerate(self.E):
                if _acyclic(self.V, [self.E[j] for j in T] + [e]):
                    T.append(idx)
            return tuple(T)
        if k == "glauber-ising":
            return tuple(int(x) for x in rng.choice((-1, 1), size=len(self.nbrs)))
        return 0

    def step(self, state, rng):
        """One jump: returns ``(holding_time, new_state, event)``.

        ``event`` is the refreshed coordinate for the product walk and
        ``None`` otherwise.  Uniformized kinds may return the same state.
        """
        k, P = self.spec.kind, self.spec.params
        if k == "glauber-ising":
            rates = np.array([ising_rate(state, u, self.nbrs, self.fb, self.beta, self.h, self.rates)
                              for u in range(len(state))])
            total = rates.sum()
            u = int(rng.choice(len(state), p=rates / total))
            return rng.exponential(1.0 / total), state[:u] + (-state[u],) + state[u + 1:], None
        if k == "qq-infinity-truncated":
            lam, N = float(P["lam"]), int(P["N"])
            birth = lam if state < N else 0.0
            total = birth + state
            if total == 0:
                return math.inf, state, None
            hold = rng.exponential(1.0 / total)
            return hold, (state + 1 if rng.random() * total < birth else state - 1), None
        hold = rng.exponential(1.0)
        if k == "simple":
            return hold, int(rng.choice(self.w.size, p=self.w)), None
        if k == "product-walk":
            i = int(rng.integers(self.n))
            s = list(state)
            s[i] = int(rng.choice(self.w.size, p=self.w))
            return hold, tuple(s), i
        if k in ("random-transposition", "top-to-random"):
            i, j = self.pairs[int(rng.integers(len(self.pairs)))]
            return hold, _transpose(state, i, j), None
        if k == "bernoulli-laplace":
            n = int(P["n"])
            rest = [j for j in range(n) if j not in state]
            i = state[int(rng.integers(len(state)))]
            j = rest[int(rng.integers(len(rest)))]
            return hold, tuple(sorted(set(state) - {i} | {j})), None
        # spanning trees
        e = int(rng.integers(len(self.E)))
        f = state[int(rng.integers(len(state)))]
        cand = tuple(sorted(set(state) - {f} | {e}))
        if len(cand) == self.V - 1 and _acyclic(self.V, [self.E[j] for j in cand]):
            return hold, cand, None
        return hold, state, None


def sample_path(sampler: TrajectorySampler, t_end: float, observables=None, initial=None,
                record: bool = False, max_jumps: int | None = None) -> dict:
    """Run the chain on ``[0, t_end]``.

    Parameters
    ----------
    observables : dict of name -> callable(state), optional
        Time averages over ``[0, t_end]`` are reported for each.
    record : bool
        Keep the full list of ``(time, state)`` jumps.

    Returns
    -------
    dict
        ``initial``, ``final``, ``jumps``, ``time_averages``,
        ``events`` (per-coordinate refresh counts, product walk only),
        ``visits`` (jump-chain state counts) and optionally ``path``.
    """
    rng = np.random.default_rng(sampler.seed)
    state = sampler.initial_state(rng) if initial is None else initial
    start = state
    t = 0.0
    observables = observables or {}
    acc = {name: 0.0 for name in observables}
    events = np.zeros(getattr(sampler, "n", 0), dtype=np.int64)
    visits = {}
    path = [(0.0, state)] if record else None
    jumps = 0
    while True:
        hold, new, ev = sampler.step(state, rng)
        dt = min(hold, t_end - t)
        for name, fn in observables.items():
            acc[name] += dt * fn(state)
        if t + hold >= t_end or (max_jumps is not None and jumps >= max_jumps):
            t = t_end if t + hold >= t_end else t + hold
            break
        t += hold
        state = new
        jumps += 1
        visits[state] = visits.get(state, 0) + 1
        if ev is not None:
            events[ev] += 1
        if record:
            path.append((t, state))
    out = {
        "initial": start,
        "final": state,
        "t_end": t,
        "jumps": jumps,
        "time_averages": {k: (v / t if t > 0 else None) for k, v in acc.items()},
        "visits": visits,
    }
    if events.size:
        out["events"] = events.tolist()
    if record:
        out["path"] = path
    return out
