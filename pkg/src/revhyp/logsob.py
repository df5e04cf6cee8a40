"""
p-log-Sobolev functionals and estimates of their optimal constants.

Everything is expressed through ``u = log g`` where ``g = f^p`` (``g = f`` at
the limit exponents 0 and 1).  In that variable both sides of the inequality
become edge sums that can be evaluated in log space:

* ``p`` generic: ``pp' sum_e w_e e^m sinh(d/2p) sinh(d/2p')``
* ``p = 1``: ``sum_e w_e e^m (d/2) sinh(d/2)``
* ``p = 0``: ``sum_e w_e (cosh d - 1)`` against ``Var(u)``

with ``m`` the edge midpoint and ``d`` the edge increment of ``u``.  Every
term is nonnegative, so a log-sum-exp gives the Dirichlet side without
cancellation, also for near-constant or very spiky functions.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .measure import DomainError, RealFunction, holder_conjugate, xlogx_excess
from .semigroup import Generator, TensorGenerator, spectral_gap

LIMIT_BAND = 1e-4
LOG2 = math.log(2.0)
U_BOX = 20.0
GRID_POINTS = 10_000
GRID_SPAN = 30.0
NM_MAX_POINTS = 8
# gradient runs on larger spaces are costlier and rarely disagree; cap the default
LBFGS_RESTARTS = 24


def exponent_kind(p: float) -> str:
    """``"zero"``, ``"one"`` or ``"generic"`` after applying the limit bands."""
    p = float(p)
    if not math.isfinite(p):
        raise DomainError("exponent must be finite")
    if abs(p) < LIMIT_BAND:
        return "zero"
    if abs(p - 1.0) < LIMIT_BAND:
        return "one"
    return "generic"


def _logsinh(x):
    a = np.abs(x)
    with np.errstate(divide="ignore"):
        return a + np.log(-np.expm1(-2.0 * a)) - LOG2


class _Edges:
    __slots__ = ("i", "j", "logw", "mu", "n")

    def __init__(self, G):
        if isinstance(G, TensorGenerator):
            G = G.materialize()
        i, j, w = G.edges()
        keep = w > 0
        self.i, self.j = i[keep], j[keep]
        self.logw = np.log(w[keep])
        self.mu = G.space.mu
        self.n = G.size


def _log_dirichlet(u, p, kind, E: _Edges, grad=True):
    """Log of the normalized Dirichlet side and its gradient in ``u``."""
    d = u[E.i] - u[E.j]
    mask = d != 0
    if not mask.any():
        return -math.inf, (np.zeros_like(u) if grad else None)
    d = d[mask]
    ii, jj, lw = E.i[mask], E.j[mask], E.logw[mask]
    m = 0.5 * (u[ii] + u[jj])
    if kind == "generic":
        pc = holder_conjugate(p)
        # order the pair so p and p' give bit-identical sums
        a_exp, b_exp = sorted((p, pc))
        a, b = d / (2 * a_exp), d / (2 * b_exp)
        lt = lw + math.log(abs(a_exp * b_exp)) + m + _logsinh(a) + _logsinh(b)
        if grad:
            gi = 0.5 + 1.0 / (np.tanh(a) * 2 * a_exp) + 1.0 / (np.tanh(b) * 2 * b_exp)
            gj = 1.0 - gi
    elif kind == "one":
        lt = lw - LOG2 + m + np.log(np.abs(d)) + _logsinh(0.5 * d)
        if grad:
            gi = 0.5 + 1.0 / d + 0.5 / np.tanh(0.5 * d)
            gj = 1.0 - gi
    else:
        lt = lw + LOG2 + 2.0 * _logsinh(0.5 * d)
        if grad:
            gi = 1.0 / np.tanh(0.5 * d)
            gj = -gi
    top = lt.max()
    logD = float(top + math.log(np.exp(lt - top).sum()))
    if not grad:
        return logD, None
    pi = np.exp(lt - logD)
    g = np.bincount(ii, pi * gi, minlength=E.n) + np.bincount(jj, pi * gj, minlength=E.n)
    return logD, g


def _log_entropy_side(u, kind, mu, grad=True):
    # plain dot products: every summand is nonnegative, so no cancellation
    if kind == "zero":
        c = u - mu @ u
        v = float(mu @ (c * c))
        if v <= 0:
            return -math.inf, (np.zeros_like(u) if grad else None)
        return math.log(v), (2.0 * mu * c / v if grad else None)
    top = u.max()
    x = np.exp(u - top)
    m = float(mu @ x)
    ent = m * float(mu @ xlogx_excess((x - m) / m))
    if ent <= 0:
        return -math.inf, (np.zeros_like(u) if grad else None)
    g = mu * x * ((u - top) - math.log(m)) / ent if grad else None
    return math.log(ent) + top, g


def _log_ratio(u, p, kind, E, grad=False):
    ln, gn = _log_entropy_side(u, kind, E.mu, grad)
    ld, gd = _log_dirichlet(u, p, kind, E, grad)
    if ln == -math.inf or ld == -math.inf:
        return -math.inf, (np.zeros_like(u) if grad else None)
    return ln - ld, ((gn - gd) if grad else None)


@dataclass(frozen=True)
class LogSobEvaluation:
    """Both sides of a p-logSob inequality with the constant factored out.

    The inequality reads ``entropy_side <= C * dirichlet_side``.
    """

    p: float
    entropy_side: float
    dirichlet_side: float
    ratio: float | None


def _as_log(f, space_mu) -> np.ndarray:
    v = f.values if isinstance(f, RealFunction) else np.asarray(f, dtype=float)
    if v.shape != space_mu.shape:
        raise DomainError("function length does not match the generator")
    if v.min() <= 0:
        raise DomainError("p-logSob functionals need a strictly positive function")
    return np.log(v)


def logsob_evaluate(G, p: float, f, *, of_g: bool = False) -> LogSobEvaluation:
    """Evaluate the p-logSob inequality at a positive function.

    Parameters
    ----------
    G : Generator or TensorGenerator
    p : float
        Any finite exponent; ``|p| < 1e-4`` and ``|p - 1| < 1e-4`` use the
        limit forms ``Var(log f) <= -(C/2) E(f, 1/f)`` and
        ``Ent(f) <= (C/4) E(f, log f)``.
    f : RealFunction or array_like
        Strictly positive.
    of_g : bool
        Treat the argument as ``g = f^p`` directly (the self-dual variable),
        so that ``p`` and its conjugate can be compared on the same ``g``.
    """
    E = _Edges(G)
    kind = exponent_kind(p)
    u = _as_log(f, E.mu)
    if kind == "generic" and not of_g:
        u = p * u
    ln, _ = _log_entropy_side(u, kind, E.mu, grad=False)
    ld, _ = _log_dirichlet(u, p, kind, E, grad=False)
    ent = math.exp(ln) if ln > -math.inf else 0.0
    dir_ = math.exp(ld) if ld > -math.inf else 0.0
    ratio = ent / dir_ if dir_ > 1e-12 else None
    return LogSobEvaluation(float(p), ent, dir_, ratio)


def selfdual_ratio(G, p: float, g) -> float:
    """``4 Ent(g) / (pp' E(g^(1/p), g^(1/p')))``, or its limit forms.

    Unlike :func:`logsob_evaluate` there is no floor on the denominator;
    constant ``g`` gives ``nan``.  At ``p = 0`` the argument is ``f``.
    """
    E = _Edges(G)
    lr, _ = _log_ratio(_as_log(g, E.mu), p, exponent_kind(p), E)
    return math.exp(lr) if lr > -math.inf else math.nan


def _ratio_from_log(G, p, u) -> float:
    E = _Edges(G)
    lr, _ = _log_ratio(np.asarray(u, dtype=float), p, exponent_kind(p), E)
    return math.exp(lr) if lr > -math.inf else math.nan


def selfdual_dirichlet(G, p: float, g) -> float:
    """``pp' E(g^(1/p), g^(1/p'))``; ``E(log g, g)`` at ``p = 1``.

    Defined for ``p`` in ``(0, 2]``; used by :func:`sv_check`.
    """
    ld = log_selfdual_dirichlet(G, p, g)
    if ld == -math.inf:
        return 0.0
    return math.inf if ld > 709.0 else math.exp(ld)


def log_selfdual_dirichlet(G, p: float, g) -> float:
    """Logarithm of :func:`selfdual_dirichlet`; finite where the value overflows."""
    E = _Edges(G)
    kind = exponent_kind(p)
    if p == 0:
        raise DomainError("exponent 0 has no self-dual Dirichlet term")
    if kind == "zero":
        # the term has no limit at 0; the generic form stays finite in logs
        kind = "generic"
    ld, _ = _log_dirichlet(_as_log(g, E.mu), p, kind, E, grad=False)
    return ld + math.log(4.0) if ld > -math.inf else -math.inf


@dataclass
class ConstantEstimate:
    """Largest ratio found; a lower bound on the optimal constant.

    ``witness`` holds ``g = f^p`` (``f`` itself at exponents 0 and 1), i.e. the
    argument to :func:`selfdual_ratio` that reproduces ``c_hat``.
    """

    p: float
    c_hat: float
    witness: RealFunction | None
    method: str
    restarts: int
    seed: int
    trace: list = field(default_factory=list)

    def trace_digest(self) -> str:
        h = hashlib.sha256(repr([(k, float(v)) for k, v in self.trace]).encode())
        return h.hexdigest()[:16]


def _space_of(G):
    return G.space


def _grid_two_point(G, p, kind, E):
    scale = p if kind == "generic" else 1.0
    s_grid = np.linspace(-GRID_SPAN, GRID_SPAN, GRID_POINTS)

    def lr(s):
        val, _ = _log_ratio(np.array([scale * s, 0.0]), p, kind, E)
        return val

    vals = np.array([lr(s) for s in s_grid])
    k = int(np.nanargmax(vals))
    best_s, best = float(s_grid[k]), float(vals[k])
    step = s_grid[1] - s_grid[0]
    # stay on one side of s = 0, where both sides vanish and precision is lost
    lo, hi = best_s - step, best_s + step
    if best_s > 0:
        lo = max(lo, 1e-4)
    else:
        hi = min(hi, -1e-4)
    res = minimize_scalar(
        lambda s: -lr(s),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    if np.isfinite(res.fun) and -res.fun > best:
        best_s, best = float(res.x), float(-res.fun)
    return best, np.array([scale * best_s, 0.0])


def _seeds(G, E, restarts, seed):
    n = E.n
    seeds = []
    for k in range(restarts):
        rng = np.random.default_rng([seed, k])
        u = rng.uniform(-3.0, 3.0, n)
        seeds.append(("random", k, u - u.mean()))
    Gm = G.materialize() if isinstance(G, TensorGenerator) else G
    phi = Gm.eigenvectors[:, 1] if n > 1 else np.zeros(n)
    phi = phi / max(np.abs(phi).max(), 1e-300)
    for j, amp in enumerate((1e-3, -1e-3, 0.5, -0.5)):
        seeds.append(("eigen", restarts + j, amp * phi))
    return seeds


def _optimize(u0, p, kind, E, maxiter):
    best = [-math.inf, u0]

    def record(u, lr):
        if lr > best[0]:
            best[0], best[1] = lr, np.array(u, copy=True)

    if E.n <= NM_MAX_POINTS:
        def obj(z):
            u = np.concatenate(([0.0], z))
            lr, _ = _log_ratio(u, p, kind, E)
            if not np.isfinite(lr):
                return math.inf
            record(u, lr)
            return -lr

        z0 = u0[1:] - u0[0]
        lr0, _ = _log_ratio(u0 - u0[0], p, kind, E)
        if np.isfinite(lr0):
            record(u0 - u0[0], lr0)
        if E.n > 1:
            minimize(obj, z0, method="Nelder-Mead",
                     options={"maxiter": maxiter or 150 * E.n, "xatol": 1e-7, "fatol": 1e-11,
                              "adaptive": True})
    else:
        def obj(u):
            lr, g = _log_ratio(u, p, kind, E, grad=True)
            if not np.isfinite(lr):
                return math.inf, np.zeros_like(u)
            record(u, lr)
            return -lr, -g

        u0 = np.clip(u0, -U_BOX, U_BOX)
        minimize(obj, u0, jac=True, method="L-BFGS-B",
                 bounds=[(-U_BOX, U_BOX)] * E.n, options={"maxiter": maxiter or 1000})
    return best[0], best[1]


def estimate_constant(G, p: float, restarts: int | None = None, seed: int = 0,
                      maxiter: int | None = None, jobs: int = 1) -> ConstantEstimate:
    """Estimate the optimal p-logSob constant from below.

    Two-point spaces are scanned exhaustively along ``f = (e^s, 1)``,
    ``s`` in ``[-30, 30]`` (10^4 points, then a local refinement).  Larger
    spaces use multi-start ascent of the log-ratio over ``u = log g``:
    Nelder-Mead up to 8 points, L-BFGS-B with analytic gradients above.
    Starts are ``restarts`` random draws (default ``2|Omega|``, capped at 24
    above 8 points) plus the gap eigenfunction at small and moderate
    amplitude.

    Returns a :class:`ConstantEstimate` whose ``c_hat`` is the largest ratio
    evaluated; it is reproducible from ``seed`` and independent of ``jobs``.
    """
    gap = spectral_gap(G)
    space = _space_of(G)
    if gap <= 0:
        return ConstantEstimate(float(p), math.inf, None, "unbounded", 0, seed)
    E = _Edges(G)
    kind = exponent_kind(p)
    if E.n == 2:
        lr, u = _grid_two_point(G, p, kind, E)
        return ConstantEstimate(float(p), math.exp(lr), RealFunction(space, np.exp(u)),
                                "grid-2pt", 0, seed, [(0, math.exp(lr))])
    if restarts is None:
        restarts = 2 * E.n if E.n <= NM_MAX_POINTS else min(2 * E.n, LBFGS_RESTARTS)
    restarts = int(restarts)
    seeds = _seeds(G, E, restarts, seed)

    def work(item):
        _, idx, u0 = item
        return idx, _optimize(u0, p, kind, E, maxiter)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, seeds))
    else:
        results = [work(s) for s in seeds]
    results.sort(key=lambda r: r[0])
    trace = [(idx, math.exp(lr) if np.isfinite(lr) else math.nan) for idx, (lr, _) in results]
    best_idx, (best_lr, best_u) = max(results, key=lambda r: (r[1][0], -r[0]))
    # re-center so the witness is well scaled; the ratio is shift invariant
    best_u = best_u - best_u.max()
    witness = RealFunction(space, np.exp(best_u))
    c_hat = _ratio_from_log(G, p, best_u)
    return ConstantEstimate(float(p), c_hat, witness, "multistart", restarts, seed, trace)


def sv_check(G, g, p: float, q: float, tol: float = 1e-10):
    """Compare ``qq' E(g^(1/q), g^(1/q'))`` with the same term at ``p``.

    Requires ``0 < q < p <= 2``.  Returns ``(lhs, rhs, holds)`` where ``lhs``
    is the ``q`` term; the inequality asserts ``lhs >= rhs``.
    """
    if not (0 < q < p <= 2):
        raise DomainError("need 0 < q < p <= 2")
    lq = log_selfdual_dirichlet(G, q, g)
    lp = log_selfdual_dirichlet(G, p, g)
    lhs = math.inf if lq > 709.0 else math.exp(lq)
    rhs = math.inf if lp > 709.0 else math.exp(lp)
    if math.isinf(lhs) or math.isinf(rhs):
        # compare on the log scale once the terms leave double range
        return lhs, rhs, bool(lq >= lp + math.log1p(-tol))
    return lhs, rhs, bool(lhs >= rhs - tol)


def poincare_constant(G) -> float:
    """Best ``kappa`` with ``Var(g) <= kappa E(g, g)``, i.e. ``1/gap``."""
    gap = spectral_gap(G)
    return math.inf if gap <= 0 else 1.0 / gap


def zero_logsob_constant(G) -> float:
    return 2.0 * poincare_constant(G)


def reversing_bound(C_q: float, q: float, p: float) -> float:
    """p-logSob constant certified from a q-logSob constant, ``1 < q <= p <= 2``."""
    if not (1 < q <= p <= 2):
        raise DomainError("need 1 < q <= p <= 2")
    return (p - 1) * q * q / ((q - 1) * p * p) * C_q


def sample_witnesses(n: int, count: int, seed: int) -> np.ndarray:
    """Log-values i.i.d. uniform on ``[-3, 3]``, re-centred; one row per witness."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-3.0, 3.0, (count, n))
    return u - u.mean(axis=1, keepdims=True)


def pointwise_ratios(G, grid, U) -> np.ndarray:
    """Self-dual ratios ``ratio_p(e^u)`` for each row ``u`` of ``U`` and ``p`` in ``grid``.

    The ``p = 0`` column is reported as 0, the value of the self-dual ratio in
    the limit ``p -> 0`` at a fixed ``g``.
    """
    E = _Edges(G)
    out = np.empty((len(U), len(grid)))
    for r, u in enumerate(U):
        for c, p in enumerate(grid):
            kind = exponent_kind(p)
            if kind == "zero":
                out[r, c] = 0.0
                continue
            lr, _ = _log_ratio(np.asarray(u, dtype=float), p, kind, E)
            out[r, c] = math.exp(lr) if lr > -math.inf else math.nan
    return out


def monotonicity_audit(G, grid=(0.0, 0.5, 1.0, 1.5, 2.0), restarts=None, seed: int = 0,
                       n_witnesses: int = 64, tol: float = 1e-9, estimate: bool = True):
    """Constants over an exponent grid plus the pointwise ratio check.

    Returns
    -------
    dict
        ``estimates``: list of :class:`ConstantEstimate` (if ``estimate``);
        ``checks``: number of ``(witness, q < p)`` comparisons;
        ``violations``: list of ``(witness, q, p, excess)``;
        ``skipped``: witnesses dropped as constant.
    """
    grid = sorted(float(p) for p in grid)
    estimates = [estimate_constant(G, p, restarts=restarts, seed=seed) for p in grid] if estimate else []
    E = _Edges(G)
    U = list(sample_witnesses(E.n, n_witnesses, seed))
    U += [np.log(e.witness.values) for e in estimates if e.witness is not None]
    R = pointwise_ratios(G, grid, U)
    checks, skipped, violations = 0, 0, []
    for r in range(R.shape[0]):
        row = R[r]
        if np.isnan(row).any():
            skipped += 1
            continue
        for a in range(len(grid)):
            for b in range(a + 1, len(grid)):
                checks += 1
                excess = row[a] - row[b]
                if excess > tol:
                    violations.append((r, grid[a], grid[b], float(excess)))
    return {"grid": grid, "estimates": estimates, "checks": checks,
            "violations": violations, "skipped": skipped}
