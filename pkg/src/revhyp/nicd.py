"""
Non-interactive correlation distillation from an ``m``-sided dice source.

A source string ``x`` is uniform on ``{0, ..., m-1}^n``; each of ``k`` players
sees an independent rho-correlated copy (each coordinate kept with
probability ``rho``, otherwise redrawn) and outputs a face.  Tables of
protocol functions are indexed row-major: the first coordinate is the most
significant digit.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .measure import DomainError

EXACT_STATES = 10**6
EXACT_PLAYERS = 8
EXACT_BALANCE_N = 10
BATCH = 4096
CI_LEVEL = 0.99
BETA_SHRINK = 1e-3


class BalanceError(DomainError):
    """A protocol function does not hit every face with probability ``1/m``."""


@dataclass(frozen=True)
class NicdConfig:
    m: int
    n: int
    k: int
    rho: float
    trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise DomainError("a dice needs at least two faces")
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.k < 2:
            raise DomainError("need at least two players")
        if not 0 <= self.rho < 1:
            raise DomainError("rho must lie in [0, 1)")
        if self.trials < 1:
            raise DomainError("trials must be positive")

    @property
    def states(self) -> int:
        return self.m ** self.n

    @property
    def t(self) -> float:
        return math.log(1.0 / self.rho) if self.rho > 0 else math.inf

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "k": self.k, "rho": self.rho,
                "trials": self.trials, "seed": self.seed}


def plurality(X: np.ndarray, m: int) -> np.ndarray:
    """Most frequent face; ties go to the face seen first in the string."""
    X = np.atleast_2d(X)
    counts = (X[:, :, None] == np.arange(m)).sum(axis=1)
    best = counts.max(axis=1)
    in_r = np.take_along_axis(counts, X, axis=1) == best[:, None]
    first = np.argmax(in_r, axis=1)
    return X[np.arange(X.shape[0]), first]


def _all_strings(m: int, n: int) -> np.ndarray:
    idx = np.arange(m ** n)
    return np.stack(np.unravel_index(idx, (m,) * n), axis=1)


@dataclass(frozen=True, eq=False)
class Protocol:
    """One player's map from strings to faces.

    ``kind`` is ``"dictator"`` (reads ``coordinate``, 1-based),
    ``"plurality"`` or ``"table"``.
    """
    m: int
    n: int
    kind: str
    coordinate: int = 1
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("dictator", "plurality", "table"):
            raise DomainError(f"unknown protocol {self.kind!r}")
        if self.kind == "dictator" and not 1 <= self.coordinate <= self.n:
            raise DomainError("dictator coordinate out of range")
        if self.kind == "table":
            t = np.asarray(self.table, dtype=np.int64).reshape(-1)
            if t.size != self.m ** self.n:
                raise DomainError(f"table needs {self.m ** self.n} entries")
            if t.min() < 0 or t.max() >= self.m:
                raise DomainError("table entries must be faces 0..m-1")
            t.setflags(write=False)
            object.__setattr__(self, "table", t)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.kind == "dictator":
            return X[:, self.coordinate - 1]
        if self.kind == "plurality":
            return plurality(X, self.m)
        return self.table[np.ravel_multi_index(X.T, (self.m,) * self.n)]

    def full_table(self) -> np.ndarray:
        if self.kind == "table":
            return self.table
        if self.m ** self.n > EXACT_STATES:
            raise DomainError("too many strings to tabulate")
        out = np.empty(self.m ** self.n, dtype=np.int64)
        S = _all_strings(self.m, self.n)
        for s in range(0, S.shape[0], 65536):
            out[s:s + 65536] = self(S[s:s + 65536])
        return out

    def to_dict(self) -> dict:
        d = {"m": self.m, "n": self.n, "kind": self.kind}
        if self.kind == "dictator":
            d["coordinate"] = self.coordinate
        if self.kind == "table":
            d["table"] = self.table.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Protocol":
        return cls(int(d["m"]), int(d["n"]), d["kind"], int(d.get("coordinate", 1)),
                   None if d.get("table") is None else np.asarray(d["table"]))


def load_protocol(path, m: int, n: int) -> Protocol:
    d = json.loads(Path(path).read_text())
    if isinstance(d, list):
        d = {"kind": "table", "table": d}
    d.setdefault("m", m)
    d.setdefault("n", n)
    return Protocol.from_dict(d)


def validate_balance(P: Protocol, trials: int = 200_000, seed: int = 0) -> dict:
    """Check ``P{F(x) = j} = 1/m`` exactly when ``n <= 10``, else by sampling (5 sigma)."""
    m = P.m
    if P.n <= EXACT_BALANCE_N and m ** P.n <= EXACT_STATES:
        counts = np.bincount(P.full_table(), minlength=m)
        ok = bool(np.all(counts * m == m ** P.n))
        return {"method": "exact", "counts": counts.tolist(), "balanced": ok}
    rng = np.random.default_rng([seed, 0])
    X = rng.integers(m, size=(trials, P.n))
    counts = np.bincount(P(X), minlength=m)
    sd = math.sqrt(trials * (1 / m) * (1 - 1 / m))
    ok = bool(np.all(np.abs(counts - trials / m) <= 5 * sd))
    return {"method": "mc", "counts": counts.tolist(), "balanced": ok}


def _require_balanced(protocols, seed=0):
    seen = {}
    for P in protocols:
        key = id(P)
        if key not in seen:
            seen[key] = validate_balance(P, seed=seed)
        if not seen[key]["balanced"]:
            raise BalanceError(f"protocol {P.kind} is not balanced: counts {seen[key]['counts']}")


def _players(cfg: NicdConfig, protocols) -> list:
    if isinstance(protocols, Protocol):
        protocols = [protocols] * cfg.k
    protocols = list(protocols)
    if len(protocols) != cfg.k:
        raise DomainError(f"{len(protocols)} protocols for {cfg.k} players")
    for P in protocols:
        if P.m != cfg.m or P.n != cfg.n:
            raise DomainError("protocol shape does not match the configuration")
    return protocols


def noise(values: np.ndarray, m: int, n: int, rho: float) -> np.ndarray:
    """``E[g(y) | x]`` for a rho-correlated copy ``y``, one coordinate at a time."""
    v = np.asarray(values, dtype=float).reshape((m,) * n)
    for axis in range(n):
        mean = v.mean(axis=axis, keepdims=True)
        v = rho * v + (1.0 - rho) * mean
    return v.reshape(-1)


def _exact_ok(cfg):
    return cfg.states <= EXACT_STATES and cfg.k <= EXACT_PLAYERS


def exact_agreement(cfg: NicdConfig, protocols) -> float:
    """``sum_j E[prod_i P{F_i(y^i) = j | x}]``."""
    players = _players(cfg, protocols)
    if cfg.states > EXACT_STATES:
        raise DomainError("too many strings for the exact route")
    full = {id(P): P.full_table() for P in players}
    tables = {}
    total = 0.0
    for j in range(cfg.m):
        prod = np.ones(cfg.states)
        for P in players:
            if (id(P), j) not in tables:
                tables[(id(P), j)] = noise(full[id(P)] == j, cfg.m, cfg.n, cfg.rho)
            prod = prod * tables[(id(P), j)]
        total += float(prod.mean())
    return total


def holder_bound(cfg: NicdConfig, protocols) -> float:
    """``sum_j prod_i ||T_t f_{i,j}||_k``, an upper bound on the agreement probability."""
    players = _players(cfg, protocols)
    full = {id(P): P.full_table() for P in players}
    total = 0.0
    for j in range(cfg.m):
        prod = 1.0
        for P in players:
            g = noise(full[id(P)] == j, cfg.m, cfg.n, cfg.rho)
            prod *= float(np.mean(g ** cfg.k)) ** (1.0 / cfg.k)
        total += prod
    return total


def _wilson(hits, trials):
    ci = binomtest(int(hits), int(trials)).proportion_ci(confidence_level=CI_LEVEL, method="wilson")
    return float(ci.low), float(ci.high)


def _batch_agreement(cfg, players, b, size):
    # agreement indicator for every prefix of the players in one batch
    rng = np.random.default_rng([cfg.seed, b])
    x = rng.integers(cfg.m, size=(size, cfg.n))
    alive = np.arange(size)
    first = None
    counts = np.zeros(len(players), dtype=np.int64)
    for i, P in enumerate(players):
        prng = np.random.default_rng([cfg.seed, b, i + 1])
        keep = prng.random((size, cfg.n)) < cfg.rho
        fresh = prng.integers(cfg.m, size=(size, cfg.n))
        y = np.where(keep, x, fresh)[alive]
        out = P(y) if alive.size else np.zeros(0, dtype=np.int64)
        if first is None:
            first = out
        else:
            same = out == first
            alive, first = alive[same], first[same]
        counts[i] = alive.size
    return counts


def mc_agreement_prefixes(cfg: NicdConfig, protocols, jobs: int = 1) -> np.ndarray:
    """Agreement counts of the first ``1, ..., k`` players over ``cfg.trials`` trials.

    Player ``i`` in batch ``b`` draws from the seed ``[seed, b, i + 1]``, so
    prefixes share random numbers and the counts do not depend on ``jobs``.
    """
    players = _players(cfg, protocols)
    sizes = [BATCH] * (cfg.trials // BATCH) + ([cfg.trials % BATCH] if cfg.trials % BATCH else [])

    def work(item):
        return _batch_agreement(cfg, players, *item)

    items = list(enumerate(sizes))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(work, items))
    else:
        parts = [work(it) for it in items]
    return np.sum(parts, axis=0)


def agreement_probability(cfg: NicdConfig, protocols, method: str = "auto", jobs: int = 1) -> dict:
    """Probability that all players output the same face.

    Exact when ``m^n <= 10^6`` and ``k <= 8`` (unless ``method="mc"``),
    otherwise Monte Carlo with a Wilson 99% interval.
    """
    players = _players(cfg, protocols)
    _require_balanced(players, cfg.seed)
    if method == "exact" or (method == "auto" and _exact_ok(cfg)):
        p = exact_agreement(cfg, players)
        return {"estimate": p, "ci_lo": p, "ci_hi": p, "method": "exact"}
    hits = int(mc_agreement_prefixes(cfg, players, jobs)[-1])
    lo, hi = _wilson(hits, cfg.trials)
    return {"estimate": hits / cfg.trials, "ci_lo": lo, "ci_hi": hi, "method": "mc", "hits": hits}


# --- power bound and envelopes ---------------------------------------------------

def admissible_beta(rho: float) -> float:
    """Largest exponent kept: ``(1 - 1e-3)`` times ``2 (1 - sqrt(rho)) / sqrt(rho)``."""
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    s = math.sqrt(rho)
    return (1.0 - BETA_SHRINK) * 2.0 * (1.0 - s) / s


def power_bound_check(f, m: int, n: int, rho: float, ks=range(2, 65)) -> dict:
    """Exact ``||T_t f||_k^k`` against ``C k^-beta`` with ``C`` fitted at the first ``k``.

    ``f`` is a table on ``{0..m-1}^n`` with values in ``[0, 1]`` and mean at most 1/2.
    """
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size != m ** n:
        raise DomainError("table size does not match m^n")
    if f.size > EXACT_STATES:
        raise DomainError("too many strings for the exact route")
    if f.min() < 0 or f.max() > 1:
        raise DomainError("values must lie in [0, 1]")
    if f.mean() > 0.5 + 1e-15:
        raise DomainError("the mean of f must be at most 1/2")
    ks = [int(k) for k in ks]
    beta = admissible_beta(rho)
    g = noise(f, m, n, rho)
    lhs = np.array([float(np.mean(g ** k)) for k in ks])
    C = lhs[0] * ks[0] ** beta
    env = C * np.array(ks, dtype=float) ** -beta
    ok = lhs <= env * (1 + 1e-12)
    # smallest k from which the envelope dominates for the rest of the range
    k_from = None
    for idx in range(len(ks) - 1, -1, -1):
        if not ok[idx]:
            break
        k_from = ks[idx]
    return {"k": ks, "lhs": lhs.tolist(), "envelope": env.tolist(), "beta": beta, "C": C,
            "dominates_from": k_from, "scaled": (lhs * np.array(ks, dtype=float) ** beta).tolist()}


def upper_bound_envelope(m: int, rho: float, k, C: float = 1.0):
    """Order-of-growth envelope ``m C k^-beta``; not a sharp constant."""
    beta = admissible_beta(rho)
    return m * C * np.asarray(k, dtype=float) ** -beta


def calibrate_envelope(value: float, m: int, rho: float, k: int = 2) -> float:
    """``C`` with ``upper_bound_envelope(m, rho, k, C) == value``."""
    return value / (m * k ** -admissible_beta(rho))


def loglog_slope(ks, values) -> float:
    """Least-squares slope of ``log value`` against ``log k`` (nonzero values only)."""
    ks, values = np.asarray(ks, dtype=float), np.asarray(values, dtype=float)
    keep = values > 0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ks[keep]), np.log(values[keep]), 1)[0])


def plurality_lower_sweep(m: int, rho: float, ks, n: int, trials: int, seed: int = 0,
                          jobs: int = 1) -> dict:
    """Monte Carlo agreement of all-plurality protocols for each ``k`` in ``ks``.

    One simulation with ``max(ks)`` players serves every ``k`` (common
    random numbers).  The envelope is calibrated to the estimate at the
    smallest ``k``.
    """
    ks = sorted(int(k) for k in ks)
    cfg = NicdConfig(m, n, ks[-1], rho, trials, seed)
    P = Protocol(m, n, "plurality")
    counts = mc_agreement_prefixes(cfg, P, jobs)
    rows = []
    for k in ks:
        hits = int(counts[k - 1])
        lo, hi = _wilson(hits, trials)
        rows.append({"k": k, "estimate": hits / trials, "ci_lo": lo, "ci_hi": hi})
    C = calibrate_envelope(rows[0]["estimate"], m, rho, ks[0]) if rho > 0 else math.nan
    for r in rows:
        r["envelope"] = float(upper_bound_envelope(m, rho, r["k"], C)) if rho > 0 else math.nan
    slope = loglog_slope([r["k"] for r in rows], [r["estimate"] for r in rows])
    return {"rows": rows, "slope": slope, "C": C, "n": n, "m": m, "rho": rho}


def n_spot_check(m: int, rho: float, k: int, ns, trials: int, seed: int = 0, jobs: int = 1) -> dict:
    """Plurality agreement at several string lengths with the same seed.

    The best protocol value is non-decreasing in ``n``; a single protocol
    family need not be, so the running maximum is reported as the
    non-decreasing lower bound it implies.
    """
    est = []
    for n in ns:
        cfg = NicdConfig(m, int(n), k, rho, trials, seed)
        est.append(agreement_probability(cfg, Protocol(m, int(n), "plurality"), method="mc", jobs=jobs)["estimate"])
    running = np.maximum.accumulate(est).tolist()
    return {"n": [int(n) for n in ns], "estimate": est, "running_max": running,
            "plurality_monotone": bool(np.all(np.diff(est) >= 0))}


def equivariance_check(P: Protocol, perms=None) -> bool:
    """``F(sigma x) = sigma F(x)`` for face permutations ``sigma`` (exact)."""
    S = _all_strings(P.m, P.n)
    base = P(S)
    perms = itertools.permutations(range(P.m)) if perms is None else perms
    for sigma in perms:
        sigma = np.asarray(sigma)
        if not np.array_equal(P(sigma[S]), sigma[base]):
            return False
    return True
