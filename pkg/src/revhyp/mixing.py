"""
Mixing from big sets: two-set lower bounds, the classical competitors,
exact and Monte Carlo joint probabilities, and lower bounds for correlated
pairs on product spaces.

Sets are sorted lists of state indices.  The measure parameters ``a`` and
``b`` are always derived from the sets through ``pi(A) = exp(-a^2/2)``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .measure import DomainError, ProbabilitySpace, fsum_dot
from .semigroup import MarkovKernel, TensorGenerator, kernel_alpha

MC_BATCH = 4096
CI_LEVEL = 0.99


class NoBoundError(ValueError):
    """No lower bound of the requested kind exists for this coupling."""


# the two-state kernel with zero minimal atom for which P{x in A, y in B} = 0
ZERO_ATOM_KERNEL = ((0.0, 1.0), (0.5, 0.5))


def measure_to_param(m: float) -> float:
    """``sqrt(-2 log m)``, the inverse of ``exp(-a^2/2)``."""
    if not 0 < m <= 1:
        raise DomainError(f"set measure {m!r} is not in (0, 1]")
    return math.sqrt(max(-2.0 * math.log(m), 0.0))


def _as_set(idx, size: int) -> list:
    s = sorted(set(int(i) for i in idx))
    if s and (s[0] < 0 or s[-1] >= size):
        raise DomainError("set index out of range")
    return s


# --- closed-form bounds ---------------------------------------------------------

def two_set_bound(C: float, a: float, b: float, t: float) -> float:
    """Lower bound on ``P{X_0 in A, X_t in B}`` from a 1-log-Sobolev constant ``C``.

    ``exp(-(a^2 + 2 e^{-2t/C} ab + b^2) / (2 (1 - e^{-4t/C})))``; returns 0
    at ``t = 0``.
    """
    if C <= 0:
        raise DomainError("C must be positive")
    if t < 0 or a < 0 or b < 0:
        raise DomainError("t, a, b must be nonnegative")
    if t == 0:
        return 0.0
    if math.isinf(t):
        return math.exp(-0.5 * (a * a + b * b))
    num = a * a + 2.0 * math.exp(-2.0 * t / C) * a * b + b * b
    den = -math.expm1(-4.0 * t / C)
    return math.exp(-0.5 * num / den)


def classical_bounds(D: float, eps: float, pi_a: float, pi_b: float, t: float) -> dict:
    """Spectral-gap (expander mixing) and mixing-time lower bounds, clamped at 0.

    ``D`` is the Poincare constant (inverse gap) and ``eps`` the total
    variation distance reached by time ``t``.
    """
    root = math.sqrt(pi_a * pi_b)
    expander = pi_a * pi_b - root * math.exp(-t / D)
    mixing_time = pi_a * (pi_b - eps)
    return {"expander": max(expander, 0.0), "mixing_time": max(mixing_time, 0.0)}


def product_improved_bound(tau: float, a: float, b: float) -> float:
    """Two-set bound for walks on product spaces, with ``tau`` the time per coordinate."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    if math.isinf(tau):
        return math.exp(-0.5 * (a * a + b * b))
    e = math.exp(-tau)
    num = (2.0 - e) * (a * a + b * b) + 2.0 * math.exp(-tau / 2) * a * b
    return math.exp(-num / (4.0 * -math.expm1(-tau)))


# --- exact and sampled joint probabilities -------------------------------------

def exact_joint(G, A, B, t: float) -> float:
    """``E[1_A T_t 1_B]`` under the stationary measure."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    n = G.size
    A, B = _as_set(A, n), _as_set(B, n)
    mu = G.mu if isinstance(G, TensorGenerator) else G.space.mu
    fb = np.zeros(n)
    fb[B] = 1.0
    h = G.heat(t, fb)
    return float(max(fsum_dot(mu[A], h[A]), 0.0))


def _wilson(k: int, n: int, level: float = CI_LEVEL):
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def _kernel_rows(G, t):
    # per-factor transition matrices and marginals
    if isinstance(G, TensorGenerator):
        mats = [f.heat_matrix(r * t) for f, r in zip(G.factors, G.rates)]
        mus = [f.space.mu for f in G.factors]
    else:
        mats, mus = [G.heat_matrix(t)], [G.space.mu]
    mats = [np.clip(M, 0.0, None) for M in mats]
    return [M / M.sum(axis=1, keepdims=True) for M in mats], mus


def _draw(rng, probs, size):
    return np.searchsorted(np.cumsum(probs), rng.random(size) * probs.sum(), side="right").clip(0, probs.size - 1)


def _draw_rows(rng, P, x):
    cdf = np.cumsum(P, axis=1)
    u = rng.random(x.size)[:, None] * cdf[x, -1:]
    return (cdf[x] <= u).sum(axis=1).clip(0, P.shape[1] - 1)


def mc_joint(G, A, B, t: float, trials: int, seed: int = 0, jobs: int = 1) -> dict:
    """Monte Carlo estimate of ``P{X_0 in A, X_t in B}`` with a Wilson interval.

    ``X_0`` is drawn from the stationary measure and ``X_t`` from the heat
    kernel row, factor by factor for tensor generators.  Batches use derived
    seeds and counts are summed, so the result does not depend on ``jobs``.
    """
    n = G.size
    inA = np.zeros(n, dtype=bool)
    inA[_as_set(A, n)] = True
    inB = np.zeros(n, dtype=bool)
    inB[_as_set(B, n)] = True
    mats, mus = _kernel_rows(G, t)
    shape = tuple(m.size for m in mus)
    sizes = [MC_BATCH] * (trials // MC_BATCH) + ([trials % MC_BATCH] if trials % MC_BATCH else [])

    def batch(item):
        k, size = item
        rng = np.random.default_rng([seed, k])
        xs, ys = [], []
        for P, m in zip(mats, mus):
            x = _draw(rng, m, size)
            xs.append(x)
            ys.append(_draw_rows(rng, P, x))
        ix = np.ravel_multi_index(xs, shape)
        iy = np.ravel_multi_index(ys, shape)
        return int(np.count_nonzero(inA[ix] & inB[iy]))

    items = list(enumerate(sizes))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            hits = sum(ex.map(batch, items))
    else:
        hits = sum(batch(it) for it in items)
    lo, hi = _wilson(hits, trials)
    return {"estimate": hits / trials, "ci_lo": lo, "ci_hi": hi, "hits": hits, "trials": trials}


@dataclass(frozen=True)
class TwoSetInstance:
    """A generator with two sets and a time; ``a`` and ``b`` come from the measures."""
    generator: object
    A: tuple
    B: tuple
    t: float
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        n = self.generator.size
        A, B = tuple(_as_set(self.A, n)), tuple(_as_set(self.B, n))
        if not A or not B:
            raise DomainError("sets must be nonempty")
        if self.t < 0:
            raise DomainError("t must be nonnegative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "a", measure_to_param(self.pi_a))
        object.__setattr__(self, "b", measure_to_param(self.pi_b))

    @property
    def _mu(self):
        G = self.generator
        return G.mu if isinstance(G, TensorGenerator) else G.space.mu

    @property
    def pi_a(self) -> float:
        return min(fsum_dot(np.ones(len(self.A)), self._mu[list(self.A)]), 1.0)

    @property
    def pi_b(self) -> float:
        return min(fsum_dot(np.ones(len(self.B)), self._mu[list(self.B)]), 1.0)

    def bound(self, C: float) -> float:
        return two_set_bound(C, self.a, self.b, self.t)

    def exact(self) -> float:
        return exact_joint(self.generator, self.A, self.B, self.t)


def sweep(G, A, B, times, C: float, trials: int = 0, seed: int = 0, jobs: int = 1) -> list:
    """Rows ``(t, bound, exact, mc_lo, mc_hi)``; MC columns are nan without trials."""
    rows = []
    for k, t in enumerate(times):
        inst = TwoSetInstance(G, tuple(A), tuple(B), float(t))
        lo = hi = math.nan
        if trials:
            mc = mc_joint(G, A, B, t, trials, seed=seed + k, jobs=jobs)
            lo, hi = mc["ci_lo"], mc["ci_hi"]
        rows.append((float(t), inst.bound(C), inst.exact(), lo, hi))
    return rows


# --- correlated pairs on product spaces -----------------------------------------

def rho_exponent(rho: float) -> float:
    """``(2 - sqrt(rho)) / (1 - sqrt(rho))``."""
    if not 0 <= rho < 1:
        raise DomainError("rho must lie in [0, 1)")
    s = math.sqrt(rho)
    return (2.0 - s) / (1.0 - s)


def exponent_sandwich(rho: float):
    """``(lower, middle, upper)`` with ``lower = e - 1/2``, ``middle = 2/(1-rho)``, ``upper = e``."""
    e = rho_exponent(rho)
    return e - 0.5, 2.0 / (1.0 - rho), e


def correlated_set_bound(coupling: str, eps: float, *, rho: float | None = None,
                         alpha: float | None = None, kappa: float | None = None) -> float:
    """Lower bound on ``P{x in A, y in B}`` when both sets have measure at least ``eps``.

    Parameters
    ----------
    coupling : {"rho", "kernel"}
    rho : float
        Correlation for ``coupling="rho"``.
    alpha : float
        Minimal atom of the coupling kernel for ``coupling="kernel"``.
    kappa : float, optional
        With ``coupling="rho"``, use the exponent ``2/(1-rho) + kappa (1-rho)``.
        No value of ``kappa`` is built in.
    """
    if not 0 <= eps <= 1:
        raise DomainError("eps must lie in [0, 1]")
    if coupling == "rho":
        if rho is None:
            raise DomainError("rho is required")
        if kappa is not None:
            if not 0 <= rho < 1:
                raise DomainError("rho must lie in [0, 1)")
            expo = 2.0 / (1.0 - rho) + kappa * (1.0 - rho)
        else:
            expo = rho_exponent(rho)
    elif coupling == "kernel":
        if alpha is None:
            raise DomainError("alpha is required")
        if not 0 <= alpha <= 1:
            raise DomainError("alpha must lie in [0, 1]")
        if alpha == 0:
            raise NoBoundError(
                "alpha = 0: no bound; the kernel ((0, 1), (1/2, 1/2)) under the uniform "
                "measure gives P{x in A, y in B} = 0 for A = {x_1 = 0}, B = {y_1 = 0}")
        expo = rho_exponent(1.0 - alpha)
    else:
        raise DomainError(f"unknown coupling {coupling!r}")
    return eps ** expo


def rho_kernel(mu, rho: float) -> np.ndarray:
    """Copy with probability ``rho``, otherwise redraw from ``mu``."""
    mu = np.asarray(mu, dtype=float)
    return rho * np.eye(mu.size) + (1.0 - rho) * np.tile(mu, (mu.size, 1))


@dataclass(frozen=True, eq=False)
class CorrelatedProductInstance:
    """``n`` i.i.d. coordinate pairs ``(x_i, y_i)`` with ``x_i ~ mu`` and ``y_i | x_i ~ K``."""
    space: ProbabilitySpace
    n: int
    coupling: str
    rho: float | None = None
    K: np.ndarray | None = None
    alpha: float = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if self.coupling == "rho":
            if self.rho is None or not 0 <= self.rho < 1:
                raise DomainError("rho must lie in [0, 1)")
            K = rho_kernel(self.space.mu, self.rho)
        elif self.coupling == "kernel":
            if self.K is None:
                raise DomainError("kernel coupling needs K")
            K = np.array(self.K, dtype=float)
        else:
            raise DomainError(f"unknown coupling {self.coupling!r}")
        kern = MarkovKernel(self.space, K)
        object.__setattr__(self, "K", kern.K)
        object.__setattr__(self, "alpha", kernel_alpha(kern)[0])

    @property
    def nu(self) -> np.ndarray:
        return self.space.mu @ self.K

    def joint1(self) -> np.ndarray:
        """Joint law of one coordinate pair."""
        return self.space.mu[:, None] * self.K

    def joint(self) -> np.ndarray:
        J, J1 = np.ones((1, 1)), self.joint1()
        for _ in range(self.n):
            J = np.kron(J, J1)
        return J

    def bound(self, eps: float) -> float:
        if self.coupling == "rho":
            return correlated_set_bound("rho", eps, rho=self.rho)
        return correlated_set_bound("kernel", eps, alpha=self.alpha)

    def to_dict(self) -> dict:
        d = {"space": self.space.to_dict(), "n": self.n, "coupling": self.coupling, "alpha": self.alpha}
        if self.coupling == "rho":
            d["rho"] = self.rho
        else:
            d["K"] = self.K.tolist()
        return d


def sample_pairs(inst: CorrelatedProductInstance, count: int, rng) -> tuple:
    """``count`` draws of ``(x, y)`` as integer arrays of shape ``(count, n)``."""
    mu = inst.space.mu
    x = _draw(rng, mu, count * inst.n).reshape(count, inst.n)
    if inst.coupling == "rho":
        fresh = _draw(rng, mu, count * inst.n).reshape(count, inst.n)
        keep = rng.random((count, inst.n)) < inst.rho
        y = np.where(keep, x, fresh)
    else:
        y = _draw_rows(rng, inst.K, x.reshape(-1)).reshape(count, inst.n)
    return x, y


def correlated_sampler(inst: CorrelatedProductInstance, seed: int = 0, batch: int = MC_BATCH):
    """Endless stream of ``(x, y)`` pairs; batch ``k`` uses the seed ``[seed, k]``."""
    for k in itertools.count():
        x, y = sample_pairs(inst, batch, np.random.default_rng([seed, k]))
        yield from zip(x, y)


def exact_correlated(inst: CorrelatedProductInstance, A, B) -> float:
    size = inst.space.size ** inst.n
    fa = np.zeros(size)
    fa[_as_set(A, size)] = 1.0
    fb = np.zeros(size)
    fb[_as_set(B, size)] = 1.0
    return float(fa @ inst.joint() @ fb)


def _orbit_representatives(m: int, n: int) -> np.ndarray:
    # subsets of a product of n identical factors, one per orbit of coordinate permutations
    states = np.array(list(itertools.product(range(m), repeat=n)))
    N = states.shape[0]
    weights = m ** np.arange(n - 1, -1, -1)
    perms = []
    for sigma in itertools.permutations(range(n)):
        perms.append(states[:, list(sigma)] @ weights)
    masks = np.arange(2 ** N, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(N)) & 1
    canon = masks.copy()
    for P in perms:
        img = (bits << P[None, :]).sum(axis=1)
        canon = np.minimum(canon, img)
    return masks[canon == masks]


def exhaustive_correlated_check(inst: CorrelatedProductInstance, tol: float = 1e-12,
                                chunk: int = 256) -> dict:
    """Check the bound for every pair of sets ``A, B``.

    ``eps`` is ``min(mu(A), nu(B))``.  Sets ``A`` are reduced to one per
    orbit of coordinate permutations, which leaves the check unchanged since
    the coordinates are identically distributed.  Limited to ``2^(|Omega|^n)
    <= 2^16`` sets.
    """
    m, n = inst.space.size, inst.n
    N = m ** n
    if N > 16:
        raise DomainError("exhaustive check is limited to 16 points")
    J = inst.joint()
    muX, nuY = J.sum(axis=1), J.sum(axis=0)
    expo = rho_exponent(inst.rho) if inst.coupling == "rho" else rho_exponent(1.0 - inst.alpha)
    allB = ((np.arange(2 ** N)[:, None] >> np.arange(N)) & 1).astype(float)
    repsA = _orbit_representatives(m, n)
    SA = ((repsA[:, None] >> np.arange(N)) & 1).astype(float)
    mB = allB @ nuY
    rhsB = mB ** expo
    worst = math.inf
    worst_pair = None
    violations = 0
    for s in range(0, SA.shape[0], chunk):
        blockA = SA[s:s + chunk]
        P = (blockA @ J) @ allB.T
        rhs = np.minimum((blockA @ muX)[:, None] ** expo, rhsB[None, :])
        slack = P - rhs
        violations += int(np.count_nonzero(slack < -tol))
        k = int(np.argmin(slack))
        if slack.flat[k] < worst:
            worst = float(slack.flat[k])
            worst_pair = (int(repsA[s + k // slack.shape[1]]), int(k % slack.shape[1]))
    return {"pairs": int(SA.shape[0]) * 2 ** N, "violations": violations,
            "min_slack": worst, "worst_masks": worst_pair, "exponent": expo}


def zero_atom_counterexample(n: int = 1) -> dict:
    """The two-state coupling with ``alpha = 0`` where the joint probability vanishes."""
    inst = CorrelatedProductInstance(ProbabilitySpace.uniform(2), n, "kernel", K=np.array(ZERO_ATOM_KERNEL))
    states = list(itertools.product((0, 1), repeat=n))
    A = [i for i, s in enumerate(states) if s[0] == 0]
    J = inst.joint()
    P = float(J[np.ix_(A, A)].sum())
    return {"alpha": inst.alpha, "mu_A": float(J.sum(axis=1)[A].sum()),
            "nu_B": float(J.sum(axis=0)[A].sum()), "joint": P}


def kernel_with_alpha(mu, P, alpha: float) -> np.ndarray:
    """``(1 - alpha) P + alpha 1 nu^T`` with ``nu = mu P``.

    When ``P`` has a zero entry the minimal atom of the result is exactly
    ``alpha``.
    """
    P = np.asarray(P, dtype=float)
    nu = np.asarray(mu, dtype=float) @ P
    return (1.0 - alpha) * P + alpha * np.tile(nu, (nu.size, 1))
