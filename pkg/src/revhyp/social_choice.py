"""
Boolean functions on biased cubes and the pieces of the quantitative Arrow
argument: Fourier coefficients, influences, the paradox probability of
three pairwise aggregation functions, and pivotal-set intersection bounds.

Truth tables are indexed by integers whose bit ``i - 1`` (least significant
first) is the coordinate ``x_i``; a set bit means ``x_i = +1``.  Fourier
coefficients use the same bit convention for the subset ``S``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .measure import DomainError
from .mixing import NoBoundError, rho_exponent

MAX_VARS = 20
EXACT_PROFILES = 6 ** 8
PARSEVAL_TOL = 1e-10
ALPHABET = "abcdefghij"


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x = x >> 1
    return c


def _along_axes(table: np.ndarray, mats) -> np.ndarray:
    # apply a 2x2 matrix per coordinate; coordinate i is axis n - i of the C-order reshape
    n = len(mats)
    v = table.reshape((2,) * n) if n else table.reshape(())
    for i, M in enumerate(mats):
        axis = n - 1 - i
        v = np.moveaxis(np.tensordot(M, v, axes=([1], [axis])), 0, axis)
    return v.reshape(-1)


def cube_points(n: int) -> np.ndarray:
    """``(2^n, n)`` array of +-1 coordinates in table order."""
    idx = np.arange(2 ** n)
    return np.where((idx[:, None] >> np.arange(n)) & 1, 1, -1)


@dataclass(frozen=True, eq=False)
class CubeFunction:
    """Function on ``{-1, 1}^n`` under a product of biased coins.

    ``bias`` is the probability of ``+1``, one value or one per coordinate.
    """
    n: int
    bias: np.ndarray
    table: np.ndarray
    _coef: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if not 0 <= n <= MAX_VARS:
            raise DomainError(f"n must be in [0, {MAX_VARS}]")
        t = np.array(self.table, dtype=float).reshape(-1)
        if t.size != 2 ** n:
            raise DomainError(f"table has {t.size} entries, expected {2 ** n}")
        if np.abs(t).max(initial=0) > 1 + 1e-12:
            raise DomainError("values must lie in [-1, 1]")
        b = np.broadcast_to(np.asarray(self.bias, dtype=float), (n,)).copy()
        if np.any(b <= 0) or np.any(b >= 1):
            raise DomainError("bias must lie strictly between 0 and 1")
        t.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "bias", b)

    @property
    def boolean(self) -> bool:
        return bool(np.all(np.abs(self.table) == 1))

    def weights(self) -> np.ndarray:
        w = np.ones(1)
        for p in self.bias[::-1]:
            w = np.kron(w, np.array([1.0 - p, p]))
        return w

    def expect(self, values=None) -> float:
        v = self.table if values is None else values
        return float(self.weights() @ v)

    def coefficients(self) -> np.ndarray:
        """Coefficients in the orthonormal basis ``prod_{i in S} psi_1(x_i)``."""
        if not self._coef:
            mats = []
            for p in self.bias:
                s = 2.0 * math.sqrt(p * (1.0 - p))
                psi_m, psi_p = (-1.0 - (2 * p - 1)) / s, (1.0 - (2 * p - 1)) / s
                mats.append(np.array([[1.0 - p, p], [(1.0 - p) * psi_m, p * psi_p]]))
            self._coef.append(_along_axes(self.table, mats))
        return self._coef[0]

    def flip(self, i: int) -> np.ndarray:
        """Table of ``x -> f(x with coordinate i negated)``, ``i`` 1-based."""
        idx = np.arange(2 ** self.n) ^ (1 << (i - 1))
        return self.table[idx]

    def to_dict(self) -> dict:
        return {"n": self.n, "bias": self.bias.tolist(), "table": self.table.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CubeFunction":
        return cls(int(d["n"]), np.asarray(d.get("bias", 0.5), dtype=float), np.asarray(d["table"]))

    @classmethod
    def from_callable(cls, n: int, fn, bias=0.5) -> "CubeFunction":
        pts = cube_points(n)
        return cls(n, bias, np.array([fn(x) for x in pts], dtype=float))

    @classmethod
    def dictator(cls, n: int, i: int = 1, bias=0.5) -> "CubeFunction":
        return cls(n, bias, cube_points(n)[:, i - 1].astype(float))

    @classmethod
    def majority(cls, n: int, bias=0.5) -> "CubeFunction":
        if n % 2 == 0:
            raise DomainError("majority needs an odd number of voters")
        return cls(n, bias, np.sign(cube_points(n).sum(axis=1)).astype(float))


def load_cube_function(path, bias=None) -> CubeFunction:
    d = json.loads(Path(path).read_text())
    if isinstance(d, list):
        d = {"n": int(round(math.log2(len(d)))), "table": d}
    if bias is not None:
        d["bias"] = bias
    return CubeFunction.from_dict(d)


def parseval_gap(f: CubeFunction) -> float:
    """``|sum_S fhat(S)^2 - E f^2|``."""
    c = f.coefficients()
    return abs(float(c @ c) - f.expect(f.table ** 2))


def _check_index(f, i):
    if not 1 <= i <= f.n:
        raise DomainError(f"coordinate {i} out of range 1..{f.n}")


def variance_influence(f: CubeFunction, i: int) -> float:
    """Fourier weight on the sets containing ``i``."""
    _check_index(f, i)
    c = f.coefficients()
    mask = (np.arange(c.size) >> (i - 1)) & 1
    return float(c[mask == 1] @ c[mask == 1])


def low_degree_influence(f: CubeFunction, i: int, d: int) -> float:
    """Fourier weight on the sets containing ``i`` with at most ``d`` elements."""
    _check_index(f, i)
    c = f.coefficients()
    S = np.arange(c.size)
    keep = (((S >> (i - 1)) & 1) == 1) & (_popcount(S) <= d)
    return float(c[keep] @ c[keep])


def influence(f: CubeFunction, i: int) -> float:
    """Probability that flipping coordinate ``i`` changes ``f``.

    For +-1 valued ``f`` the sandwich against :func:`variance_influence` is
    checked on every call.
    """
    _check_index(f, i)
    val = f.expect((f.table != f.flip(i)).astype(float))
    if f.boolean:
        I = variance_influence(f, i)
        p = f.bias[i - 1]
        if not I - 1e-10 <= val <= I / (4 * p * (1 - p)) + 1e-10:
            raise ArithmeticError(f"influence sandwich failed at coordinate {i}")
    return val


# --- ranking laws ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RankingDistribution:
    """Law of one voter's ranking of ``k`` alternatives.

    ``probs`` maps rankings such as ``"bca"`` (``b`` on top) to positive
    probabilities summing to one.
    """
    k: int
    probs: dict
    alpha: float = field(init=False)

    def __post_init__(self):
        k = int(self.k)
        if not 3 <= k <= len(ALPHABET):
            raise DomainError("k must be between 3 and 10")
        names = ["".join(r) for r in itertools.permutations(ALPHABET[:k])]
        probs = {str(r): float(v) for r, v in self.probs.items()}
        if set(probs) != set(names):
            raise DomainError(f"need a probability for each of the {len(names)} rankings")
        if min(probs.values()) <= 0:
            raise DomainError("every ranking needs positive probability")
        if abs(math.fsum(probs.values()) - 1) > 1e-12:
            raise DomainError("ranking probabilities must sum to 1")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "probs", {r: probs[r] for r in names})
        object.__setattr__(self, "alpha", self._triple_alpha())

    @property
    def rankings(self) -> list:
        return list(self.probs)

    def pair_sign(self, ranking: str, a: str, b: str) -> int:
        return 1 if ranking.index(a) < ranking.index(b) else -1

    def triple_law(self, a="a", b="b", c="c") -> dict:
        """Law of ``(x^{a>b}, x^{b>c}, x^{c>a})`` for one voter."""
        law = {}
        for r, p in self.probs.items():
            key = (self.pair_sign(r, a, b), self.pair_sign(r, b, c), self.pair_sign(r, c, a))
            law[key] = law.get(key, 0.0) + p
        return law

    def _triple_alpha(self) -> float:
        atoms = []
        for a, b, c in itertools.combinations(ALPHABET[:self.k], 3):
            atoms.append(min(self.triple_law(a, b, c).values()))
        return min(atoms)

    def pair_joint(self, first=("a", "b"), second=("b", "c")) -> np.ndarray:
        """2x2 joint law of two pairwise signs, index 0 for -1 and 1 for +1."""
        J = np.zeros((2, 2))
        for r, p in self.probs.items():
            u = self.pair_sign(r, *first)
            v = self.pair_sign(r, *second)
            J[(u + 1) // 2, (v + 1) // 2] += p
        return J

    def correlation(self, first=("a", "b"), second=("b", "c")) -> float:
        J = self.pair_joint(first, second)
        s = np.array([-1.0, 1.0])
        mx, my = J.sum(axis=1) @ s, J.sum(axis=0) @ s
        cov = s @ J @ s - mx * my
        return float(cov / math.sqrt((1 - mx * mx) * (1 - my * my)))

    def to_dict(self) -> dict:
        return {"k": self.k, "probs": dict(self.probs)}

    @classmethod
    def from_dict(cls, d: dict) -> "RankingDistribution":
        return cls(int(d["k"]), d["probs"])

    @classmethod
    def uniform(cls, k: int = 3) -> "RankingDistribution":
        names = ["".join(r) for r in itertools.permutations(ALPHABET[:k])]
        return cls(k, {r: 1.0 / len(names) for r in names})


PAIRS = (("a", "b"), ("b", "c"), ("c", "a"))


def _pair_expect(f: CubeFunction, g: CubeFunction, J: np.ndarray) -> float:
    # E[f(X) g(Y)] with (X_i, Y_i) i.i.d. with joint J
    K = J / J.sum(axis=1, keepdims=True)
    Kg = _along_axes(g.table, [K] * g.n)
    w = np.ones(1)
    mx = J.sum(axis=1)
    for _ in range(f.n):
        w = np.kron(w, mx)
    return float(w @ (f.table * Kg))


def paradox_probability(f1: CubeFunction, f2: CubeFunction, f3: CubeFunction,
                        law: RankingDistribution, mc: int | None = None, seed: int = 0) -> dict:
    """Paradox probability of three pairwise functions on ``a>b``, ``b>c``, ``c>a``.

    Exact by the correlation formula unless ``mc`` trials are requested.
    """
    if law.k != 3:
        raise DomainError("paradox probability is defined for three alternatives")
    n = f1.n
    if f2.n != n or f3.n != n:
        raise DomainError("functions must have the same number of voters")
    if mc:
        return _paradox_mc(f1, f2, f3, law, int(mc), seed)
    fs = (f1, f2, f3)
    total = 1.0
    for (u, v) in ((0, 1), (1, 2), (2, 0)):
        total += _pair_expect(fs[u], fs[v], law.pair_joint(PAIRS[u], PAIRS[v]))
    px = 0.25 * total
    if f1.boolean and f2.boolean and f3.boolean:
        # a probability in this case; drop rounding residue
        px = min(max(px, 0.0), 1.0)
    return {"px": px, "method": "exact"}


def _pair_vectors(law: RankingDistribution, idx: np.ndarray):
    # idx: (..., n) ranking indices -> table indices of x^{ab}, x^{bc}, x^{ca}
    signs = np.array([[law.pair_sign(r, a, b) for (a, b) in PAIRS] for r in law.rankings])
    bits = (signs[idx] > 0).astype(np.int64)
    pw = 1 << np.arange(idx.shape[-1])
    return [(bits[..., k] * pw).sum(axis=-1) for k in range(3)]


def _paradox_mc(f1, f2, f3, law, trials, seed):
    p = np.array(list(law.probs.values()))
    hits = 0.0
    sq = 0.0
    boolean = f1.boolean and f2.boolean and f3.boolean
    done = 0
    k = 0
    while done < trials:
        size = min(4096, trials - done)
        rng = np.random.default_rng([seed, k])
        idx = rng.choice(p.size, size=(size, f1.n), p=p)
        a, b, c = _pair_vectors(law, idx)
        v1, v2, v3 = f1.table[a], f2.table[b], f3.table[c]
        val = 0.25 * (1 + v1 * v2 + v2 * v3 + v3 * v1)
        hits += float(val.sum())
        sq += float((val * val).sum())
        done += size
        k += 1
    est = hits / trials
    if boolean:
        ci = binomtest(int(round(hits)), trials).proportion_ci(0.99, method="wilson")
        lo, hi = float(ci.low), float(ci.high)
    else:
        sd = math.sqrt(max(sq / trials - est * est, 0.0) / trials)
        lo, hi = est - 2.5758293035489 * sd, est + 2.5758293035489 * sd
    return {"px": est, "ci_lo": lo, "ci_hi": hi, "trials": trials, "method": "mc"}


def paradox_bruteforce(f1, f2, f3, law: RankingDistribution) -> float:
    """Probability that the aggregate pairwise outcome is cyclic, by enumerating profiles."""
    n = f1.n
    if 6 ** n > EXACT_PROFILES:
        raise DomainError("too many profiles to enumerate")
    p = np.array(list(law.probs.values()))
    idx = np.array(list(itertools.product(range(6), repeat=n))).reshape(-1, n)
    a, b, c = _pair_vectors(law, idx)
    o1, o2, o3 = f1.table[a], f2.table[b], f3.table[c]
    cyclic = (o1 == o2) & (o2 == o3)
    w = np.prod(p[idx], axis=1)
    return float(w[cyclic].sum())


# --- pivotal sets ------------------------------------------------------------------

def pivotal_intersection_bound(eps: float, alpha: float) -> float:
    """``eps`` raised to ``(2 - sqrt(1-alpha)) / (1 - sqrt(1-alpha))``."""
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    if not 0 <= alpha <= 1:
        raise DomainError("alpha must lie in [0, 1]")
    if alpha == 0:
        raise NoBoundError("alpha = 0: the pivotal sets may be disjoint")
    return eps ** rho_exponent(1.0 - alpha)


def pivotal_intersection_exact(f_ab: CubeFunction, f_bc: CubeFunction, law: RankingDistribution,
                               i: int = 1, j: int = 2) -> dict:
    """Exact probability that voter ``i`` is pivotal for ``f_ab`` and ``j`` for ``f_bc``.

    The influences are taken under the marginal biases induced by ``law``;
    the returned ``bound`` uses ``eps = min`` of the two influences.
    """
    n = f_ab.n
    if n > 8:
        raise DomainError("exact pivotal check is limited to 8 voters")
    J = law.pair_joint(PAIRS[0], PAIRS[1])
    fa = CubeFunction(n, J.sum(axis=1)[1], f_ab.table)
    fb = CubeFunction(n, J.sum(axis=0)[1], f_bc.table)
    A = (fa.table != fa.flip(i)).astype(float)
    B = (fb.table != fb.flip(j)).astype(float)
    prob = _pair_expect(CubeFunction(n, fa.bias, A), CubeFunction(n, fb.bias, B), J)
    inf_a, inf_b = fa.expect(A), fb.expect(B)
    eps = min(inf_a, inf_b)
    bound = pivotal_intersection_bound(eps, law.alpha) if eps > 0 else 0.0
    return {"probability": prob, "inf_ab": inf_a, "inf_bc": inf_b, "eps": eps,
            "alpha": law.alpha, "bound": bound, "holds": prob >= bound - 1e-12}


def log_delta_for_epsilon(eps: float, alpha: float, C: float) -> float:
    """Logarithm of :func:`delta_for_epsilon`."""
    if not 0 < eps < 1 or not 0 < alpha < 1:
        raise DomainError("eps and alpha must lie in (0, 1)")
    if C <= 0:
        raise DomainError("C must be positive")
    L = math.log(1.0 / eps)
    log_mag = (math.log(C) + 7 * math.log(1 / alpha) + alpha ** -2 * math.log(2)
               + 2 * math.log(L) + (2 + 0.5 / alpha ** 2) * L)
    return -math.exp(log_mag) if log_mag < 700 else -math.inf


def delta_for_epsilon(eps: float, alpha: float, C: float) -> float:
    """``exp(-C alpha^-7 2^(alpha^-2) log(1/eps)^2 / eps^(2 + 1/(2 alpha^2)))``."""
    return math.exp(log_delta_for_epsilon(eps, alpha, C))
