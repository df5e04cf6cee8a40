"""
Forward and reverse hypercontractivity: counterexample search, critical
times, and the catalogue of sufficient time thresholds.

Verification is falsification: ``verify`` minimizes the signed log-norm gap
over positive functions ``f = exp(u)`` and reports the smallest value seen.
A negative minimum comes with a witness; a nonnegative one only means the
search found nothing.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import logsumexp

from .measure import (
    DomainError,
    RealFunction,
    entropy,
    fsum_dot,
    holder_conjugate,
    log_p_norm,
)
from .semigroup import Generator, TensorGenerator

U_BOX = 8.0
VIOLATION_TOL = 1e-9
SERIES_BAND = 1e-8

STATUS_OK = "no-counterexample-found"
STATUS_BAD = "violated"


@dataclass(frozen=True)
class HyperQuery:
    """One hypercontractive inequality.

    ``forward``: ``||T_t f||_p <= ||f||_q`` with ``1 < q <= p``.
    ``reverse``: ``||T_t f||_q >= ||f||_p`` with ``q < p < 1``, ``f > 0``.
    """

    direction: str
    p: float
    q: float
    t: float

    def __post_init__(self):
        if self.direction not in ("forward", "reverse"):
            raise DomainError("direction must be 'forward' or 'reverse'")
        if not (math.isfinite(self.t) and self.t >= 0):
            raise DomainError("t must be finite and >= 0")
        if self.direction == "forward" and not (1 < self.q <= self.p):
            raise DomainError("forward queries need 1 < q <= p")
        if self.direction == "reverse" and not (self.q < self.p < 1):
            raise DomainError("reverse queries need q < p < 1")

    @property
    def outer(self) -> float:
        """Exponent applied to ``T_t f``."""
        return self.p if self.direction == "forward" else self.q

    @property
    def inner(self) -> float:
        return self.q if self.direction == "forward" else self.p

    def to_dict(self) -> dict:
        return {"direction": self.direction, "p": self.p, "q": self.q, "t": self.t}


@dataclass
class InequalityVerdict:
    query: HyperQuery
    status: str
    witness: RealFunction | None
    deficit: float
    restarts: int
    seed: int
    trace: list = field(default_factory=list)

    @property
    def violated(self) -> bool:
        return self.status == STATUS_BAD


def _heat_fn(G, t):
    if isinstance(G, TensorGenerator):
        return lambda v: G.heat(t, v), G.mu
    H = G.heat_matrix(t)
    return (lambda v: H @ v), G.space.mu


def _lnorm_log(lv, r, logmu):
    """log-norm of ``exp(lv)`` and its gradient in ``lv``."""
    if abs(r) < SERIES_BAND:
        mu = np.exp(logmu)
        m = float(mu @ lv)
        var = float(mu @ (lv - m) ** 2)
        return m + 0.5 * r * var, mu * (1.0 + r * (lv - m))
    z = r * lv + logmu
    lse = float(logsumexp(z))
    return lse / r, np.exp(z - lse)


def _gap(u, q: HyperQuery, heat, mu, logmu, grad=False):
    # scale invariance: shift u so its maximum is 0
    u = u - u.max()
    f = np.exp(u)
    h = heat(f)
    h = np.maximum(h, np.finfo(float).tiny)
    lh = np.log(h)
    v_out, w_out = _lnorm_log(lh, q.outer, logmu)
    v_in, w_in = _lnorm_log(u, q.inner, logmu)
    sign = 1.0 if q.direction == "reverse" else -1.0
    val = sign * (v_out - v_in)
    if not grad:
        return val, None
    # d/du of log||T f||: f * T^*(w/h), with T^* = D T D^{-1}
    g_out = f * (mu * heat(w_out / h / mu))
    return val, sign * (g_out - w_in)


def gap_value(G, query: HyperQuery, f) -> float:
    """Signed log-norm gap through the reference routines; negative means violated."""
    v = f.values if isinstance(f, RealFunction) else np.asarray(f, dtype=float)
    space = G.space
    Tf = G.heat(query.t, v)
    if query.direction == "reverse":
        return log_p_norm(Tf, query.q, space) - log_p_norm(v, query.p, space)
    return log_p_norm(v, query.q, space) - log_p_norm(Tf, query.p, space)


def _two_point_search(query, heat, mu, logmu, span=16.0, points=4001):
    s = np.linspace(-span, span, points)
    F = np.vstack([np.exp(np.minimum(s, 0.0)), np.exp(np.minimum(-s, 0.0))])
    Hm = np.column_stack([heat(np.array([1.0, 0.0])), heat(np.array([0.0, 1.0]))])
    HF = np.maximum(Hm @ F, np.finfo(float).tiny)
    lu = np.log(F)

    def lnorm(L, r):
        if abs(r) < SERIES_BAND:
            m = mu @ L
            return m + 0.5 * r * (mu @ (L - m) ** 2)
        return logsumexp(r * L + logmu[:, None], axis=0) / r

    sign = 1.0 if query.direction == "reverse" else -1.0
    vals = sign * (lnorm(np.log(HF), query.outer) - lnorm(lu, query.inner))
    k = int(np.argmin(vals))
    best_s, best = float(s[k]), float(vals[k])
    step = s[1] - s[0]

    def one(x):
        return _gap(np.array([x, 0.0]), query, heat, mu, logmu)[0]

    res = minimize_scalar(one, bounds=(best_s - step, best_s + step), method="bounded",
                          options={"xatol": 1e-12})
    if res.fun < best:
        best_s, best = float(res.x), float(res.fun)
    return best, np.array([best_s, 0.0])


def _seeds(G, n, restarts, seed):
    out = []
    amps = (U_BOX, 2.0, 0.3)
    for k in range(restarts):
        rng = np.random.default_rng([seed, k])
        out.append((k, rng.uniform(-1.0, 1.0, n) * amps[k % 3]))
    if isinstance(G, Generator):
        phi = G.eigenvectors[:, 1]
        phi = phi / max(np.abs(phi).max(), 1e-300)
        for j, a in enumerate((0.05, -0.05, 1.0, -1.0, 4.0, -4.0)):
            out.append((restarts + j, a * phi))
    return out


def _search(u0, query, heat, mu, logmu, maxiter):
    best = [math.inf, u0]

    def obj(u):
        val, g = _gap(u, query, heat, mu, logmu, grad=True)
        if val < best[0]:
            best[0], best[1] = val, np.array(u, copy=True)
        return val, g

    minimize(obj, np.clip(u0, -U_BOX, U_BOX), jac=True, method="L-BFGS-B",
             bounds=[(-U_BOX, U_BOX)] * len(u0), options={"maxiter": maxiter})
    return best[0], best[1]


def verify(G, query: HyperQuery, restarts: int = 64, seed: int = 0,
           maxiter: int = 500, jobs: int = 1) -> InequalityVerdict:
    """Search for a positive ``f`` violating the queried inequality.

    Two-point spaces are scanned along ``f = (e^s, 1)``, ``s`` in
    ``[-16, 16]``, then refined locally.  Larger spaces use ``restarts``
    L-BFGS-B runs over ``u = log f`` in the box ``[-8, 8]^n``, plus starts
    along the gap eigenfunction.  The reported deficit is the minimal gap,
    recomputed at the witness with the reference norm routines.
    """
    heat, mu = _heat_fn(G, query.t)
    logmu = np.log(mu)
    n = mu.size
    if n == 2:
        best, u = _two_point_search(query, heat, mu, logmu)
        trace = [(0, best)]
        used = 0
    else:
        seeds = _seeds(G, n, restarts, seed)

        def work(item):
            k, u0 = item
            return k, _search(u0, query, heat, mu, logmu, maxiter)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                res = list(ex.map(work, seeds))
        else:
            res = [work(s) for s in seeds]
        res.sort(key=lambda r: r[0])
        trace = [(k, v) for k, (v, _) in res]
        _, (best, u) = min(res, key=lambda r: (r[1][0], r[0]))
        used = restarts
    u = u - u.max()
    witness = RealFunction(G.space, np.exp(u))
    deficit = gap_value(G, query, witness)
    status = STATUS_BAD if deficit < -VIOLATION_TOL else STATUS_OK
    return InequalityVerdict(query, status, witness,
                             deficit, used, seed, trace)


def critical_time(G, direction: str, p: float, q: float, restarts: int = 16, seed: int = 0,
                  t_max: float = 50.0, width: float = 1e-3, jobs: int = 1):
    """Empirical critical time by bisection on ``t``.

    Returns
    -------
    t_star : float
        Midpoint of the final bracket (``inf`` when violated at ``t_max``).
    bracket : (float, float)
        ``t_lo`` has a counterexample, ``t_hi`` has none found.
    """
    def bad(t):
        return verify(G, HyperQuery(direction, p, q, t), restarts, seed, jobs=jobs).violated

    if bad(t_max):
        return math.inf, (t_max, math.inf)
    lo, hi = 0.0, t_max
    if not bad(lo):
        return 0.0, (0.0, 0.0)
    # geometric refinement of the upper end before bisecting
    probe = 1.0
    while probe < t_max:
        if bad(probe):
            lo = probe
            probe *= 2.0
        else:
            hi = probe
            break
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if bad(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), (lo, hi)


# --- threshold catalogue -----------------------------------------------------

FAMILIES = ("borell", "general", "simple", "simple-strong",
            "two-function-general", "two-function-simple", "bonami")


def threshold(family: str, p: float, q: float, C: float | None = None) -> float:
    """Sufficient time for the inequality of a family.

    ``bonami`` is the forward case ``1 < q < p``; every other family is
    reverse, ``q < p < 1``; the two-function families take ``0 < p, q < 1``.
    ``general`` and ``two-function-general`` need the 1-logSob constant ``C``.
    """
    p, q = float(p), float(q)
    if family == "bonami":
        if not (1 < q <= p):
            raise DomainError("bonami needs 1 < q <= p")
        return 0.5 * math.log((p - 1) / (q - 1))
    if family.startswith("two-function"):
        if not (0 < p < 1 and 0 < q < 1):
            raise DomainError("two-function thresholds need 0 < p, q < 1")
        if family == "two-function-general":
            _need_c(C)
            return -(C / 4) * math.log((1 - p) * (1 - q))
        if family == "two-function-simple":
            return math.log((2 - p) * (2 - q) / (4 * (1 - p) * (1 - q)))
        raise DomainError(f"unknown family {family!r}")
    if not (q < p < 1):
        raise DomainError(f"{family} needs q < p < 1")
    base = math.log((1 - q) / (1 - p))
    if family == "borell":
        return 0.5 * base
    if family == "simple":
        return base
    if family == "general":
        _need_c(C)
        return (C / 4) * base
    if family == "simple-strong":
        if q >= 0:
            return math.log((1 - q) * (2 - p) / ((1 - p) * (2 - q)))
        if p <= 0:
            return math.log((2 - q) / (2 - p))
        # q < 0 < p: pass through exponent 0 using both branches
        return math.log((2 - q) * (2 - p) / (4 * (1 - p)))
    raise DomainError(f"unknown family {family!r}")


def _need_c(C):
    if C is None or not C > 0:
        raise DomainError("this family needs a positive constant C")


def theta(q: float) -> float:
    """``1 + q (2-q)^(-1+2/q) [4(1-q)]^(-1/q)`` for ``q < 0``."""
    if not q < 0:
        raise DomainError("theta is defined for q < 0")
    return 1.0 + _theta_excess(q)


def _theta_excess(q):
    # (2-q)^2 = 4(1-q) + q^2 turns the power into a log1p
    return q * math.exp(-math.log(2 - q) + math.log1p(q * q / (4 * (1 - q))) / q)


def eta(q: float) -> float:
    """``-log theta(q)``, the time after which ``||T_t f||_q >= ||f||_0``."""
    if not q < 0:
        raise DomainError("eta is defined for q < 0")
    return -math.log1p(_theta_excess(q))


def tau(p: float) -> float:
    """``-log theta(p')`` for ``0 < p < 1``."""
    if not 0 < p < 1:
        raise DomainError("tau is defined for 0 < p < 1")
    return eta(holder_conjugate(p))


# --- two-function and Hoelder checks -----------------------------------------

def _norm_nonneg(v, r, mu) -> float:
    # 0 < r < 1 on nonnegative functions; zeros are allowed here
    return fsum_dot(mu, np.power(v, r)) ** (1.0 / r)


def two_function_check(G, f, g, p: float, q: float, t: float, tol: float = 1e-10):
    """``E[f T_t g]`` against ``||f||_p ||g||_q`` for nonnegative ``f, g``."""
    if not (0 < p < 1 and 0 < q < 1):
        raise DomainError("need 0 < p, q < 1")
    fv = np.asarray(f.values if isinstance(f, RealFunction) else f, dtype=float)
    gv = np.asarray(g.values if isinstance(g, RealFunction) else g, dtype=float)
    if fv.min() < 0 or gv.min() < 0:
        raise DomainError("functions must be nonnegative")
    mu = G.space.mu
    lhs = fsum_dot(mu * fv, G.heat(t, gv))
    rhs = _norm_nonneg(fv, p, mu) * _norm_nonneg(gv, q, mu)
    return lhs, rhs, bool(lhs >= rhs - tol)


def reverse_holder_check(f: RealFunction, p: float, trials: int = 1000, seed: int = 0):
    """``||f||_p`` versus ``inf E[f g]`` over ``g > 0`` with ``||g||_{p'} >= 1``.

    Returns ``(norm, inf_estimate, attained)``: ``inf_estimate`` is the
    smallest ``E[f g]`` over the analytic optimizer ``g ~ f^(p-1)`` and
    ``trials`` random feasible ``g``; ``attained`` says whether the optimizer
    reproduces the norm within 1e-9.
    """
    if not p < 1:
        raise DomainError("need p < 1")
    space = f.space
    pc = holder_conjugate(p) if p != 0 else 0.0
    norm = math.exp(log_p_norm(f, p))
    u = np.log(f.values)
    gs = np.exp((p - 1) * u - log_p_norm(np.exp((p - 1) * u), pc, space))
    best_star = space.expect(f.values * gs)
    rng = np.random.default_rng(seed)
    best = best_star
    for _ in range(trials):
        lg = rng.normal(0.0, 1.5, space.size)
        lg -= log_p_norm(np.exp(lg), pc, space)
        best = min(best, space.expect(f.values * np.exp(lg)))
    return norm, best, abs(best_star - norm) <= 1e-9 * max(1.0, norm)


def implied_poincare(p: float, q: float, t: float) -> float:
    """Poincare constant implied by reverse hypercontractivity at ``(p, q, t)``."""
    if not (q < p < 1):
        raise DomainError("need q < p < 1")
    if not t > 0:
        raise DomainError("need t > 0")
    den = math.log1p(-q) - math.log1p(-p)
    if den == 0:
        raise DomainError("log(1-q) = log(1-p)")
    return 2.0 * t / den


def implied_logsob_constant(t_star: float, p: float, q: float, direction: str = "reverse") -> float:
    """Constant ``C`` for which ``t_star`` equals the ``(C/4) log(...)`` threshold."""
    if direction == "reverse":
        return 4.0 * t_star / math.log((1 - q) / (1 - p))
    return 4.0 * t_star / math.log((p - 1) / (q - 1))


def moment_derivative(G, f, p: float, t_of_p, dt_of_p):
    """Analytic ``d/dp log ||T_{t(p)} f||_p`` for ``p`` not in ``{0, 1}``.

    ``(Ent(f_t^p) - p^2 t'(p) E(f_t^(p-1), f_t)) / (p^2 E f_t^p)`` with
    ``f_t = T_{t(p)} f``.
    """
    v = np.asarray(f.values if isinstance(f, RealFunction) else f, dtype=float)
    mu = G.space.mu
    ft = G.heat(t_of_p(p), v)
    fp = ft ** p
    ent = entropy(fp, G.space)
    dir_ = G.dirichlet(ft ** (p - 1), ft)
    return (ent - p * p * dt_of_p(p) * dir_) / (p * p * fsum_dot(mu, fp))


def moment_derivative_fd(G, f, p: float, t_of_p, h: float = 1e-5) -> float:
    v = np.asarray(f.values if isinstance(f, RealFunction) else f, dtype=float)

    def val(x):
        return log_p_norm(G.heat(t_of_p(x), v), x, G.space)

    return (val(p + h) - val(p - h)) / (2 * h)
