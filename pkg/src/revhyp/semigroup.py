"""
Reversible Markov generators on finite spaces and their heat semigroups.

A generator is stored as the dense rate matrix ``L`` acting on functions,
``(Lf)(x) = sum_y L[x, y] f(y)``, so the semigroup is ``T_t = exp(-t L)``
and the Dirichlet form is ``E(f, g) = E_mu[f L g]``.  Heat flows are computed
from one symmetric eigendecomposition of ``D^(1/2) L D^(-1/2)``.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measure import (
    DomainError,
    ProbabilitySpace,
    RealFunction,
    fsum_dot,
    product_space,
)

AXIOM_TOL = 1e-10
EIG_CLAMP = 1e-10
MATERIALIZE_CAP = 20000


class GeneratorValidationError(ValueError):
    """A candidate rate matrix breaks one or more generator axioms.

    Attributes
    ----------
    violations : list of (str, float)
        Axiom name and the size of the worst violation.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{name} (magnitude {mag:.3e})" for name, mag in self.violations)
        super().__init__(f"generator axioms violated: {msg}")


class ReducibleWarning(UserWarning):
    pass


class TooLargeError(ValueError):
    """Explicit matrices are refused above the state cap."""


class DecompositionError(ValueError):
    pass


def _symmetrized(L: np.ndarray, mu: np.ndarray) -> np.ndarray:
    # off-diagonals as -sqrt(L_xy L_yx): equal to sqrt(mu_x/mu_y) L_xy under
    # reversibility, but never forms mu ratios, which matters for tiny atoms
    S = -np.sqrt(np.clip(L, None, 0.0) * np.clip(L.T, None, 0.0))
    np.fill_diagonal(S, np.diag(L))
    return S


def _axiom_report(L: np.ndarray, mu: np.ndarray):
    scale = max(1.0, float(np.abs(L).max(initial=0.0)))
    tol = AXIOM_TOL * scale
    out = []
    rows = np.abs(L.sum(axis=1)).max()
    if rows > tol:
        out.append(("L1 = 0", float(rows)))
    A = mu[:, None] * L
    asym = np.abs(A - A.T).max()
    if asym > tol:
        out.append(("self-adjoint", float(asym)))
    off = L - np.diag(np.diag(L))
    pos = off.max(initial=0.0)
    if pos > tol:
        out.append(("maximum principle", float(pos)))
    return out, tol


class Generator:
    """Validated generator of a reversible Markov semigroup.

    Parameters
    ----------
    space : ProbabilitySpace
        Stationary measure.
    L : array_like, shape (n, n)
        Rate matrix acting on functions.
    check : bool
        Run :func:`validate_generator`'s axiom checks.  Builders that are
        correct by construction may skip them.
    """

    def __init__(self, space: ProbabilitySpace, L, check: bool = True):
        L = np.array(L, dtype=float)
        if L.ndim != 2 or L.shape != (space.size, space.size):
            raise DomainError(f"rate matrix shape {L.shape} does not match {space.size} points")
        if not np.all(np.isfinite(L)):
            raise DomainError("rate matrix has non-finite entries")
        L.setflags(write=False)
        self.space = space
        self.L = L
        self._lock = threading.Lock()
        self._eig = None
        if check:
            violations, _ = _axiom_report(L, space.mu)
            if violations:
                raise GeneratorValidationError(violations)
            w = self._spectrum()[0]
            if w.min() < -EIG_CLAMP * max(1.0, abs(w).max()):
                raise GeneratorValidationError([("positive semidefinite", float(-w.min()))])

    @property
    def size(self) -> int:
        return self.space.size

    def _spectrum(self):
        # computed once; later reads skip the lock
        eig = self._eig
        if eig is not None:
            return eig
        with self._lock:
            if self._eig is None:
                mu = self.space.mu
                w, V = np.linalg.eigh(_symmetrized(self.L, mu))
                raw_min = w.min()
                w = np.where((w < 0) & (w >= -EIG_CLAMP), 0.0, w)
                phi = V / np.sqrt(mu)[:, None]
                self._eig = (w, phi, raw_min)
            return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._spectrum()[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        """mu-orthonormal eigenfunctions as columns."""
        return self._spectrum()[1]

    def heat_matrix(self, t: float) -> np.ndarray:
        """Matrix of ``T_t``; ``t`` may be negative (no checks)."""
        w, phi, _ = self._spectrum()
        return (phi * np.exp(-t * w)) @ (phi.T * self.space.mu)

    def apply(self, values) -> np.ndarray:
        return self.L @ np.asarray(values, dtype=float)

    def heat(self, t: float, values) -> np.ndarray:
        w, phi, _ = self._spectrum()
        v = np.asarray(values, dtype=float)
        coef = phi.T @ (self.space.mu[:, None] * v if v.ndim == 2 else self.space.mu * v)
        decay = np.exp(-t * w)
        coef = coef * (decay[:, None] if v.ndim == 2 else decay)
        return phi @ coef

    def dirichlet(self, f, g) -> float:
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        return fsum_dot(self.space.mu * f, self.L @ g)

    def dirichlet_pairs(self, f, g) -> float:
        """Same form through ``sum_{x<y} mu_x W_xy (f_x - f_y)(g_x - g_y)``."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        i, j = np.triu_indices(self.size, 1)
        w = -self.space.mu[i] * self.L[i, j]
        return fsum_dot(w, (f[i] - f[j]) * (g[i] - g[j]))

    def edges(self):
        """Index pairs ``i < j`` with nonzero rate and their weights ``mu_i W_ij``."""
        i, j = np.nonzero(np.triu(self.L, 1))
        return i, j, -self.space.mu[i] * self.L[i, j]

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "L": self.L.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Generator":
        space = ProbabilitySpace.from_dict(d["space"])
        return validate_generator(np.array(d["L"], dtype=float), space)


def validate_generator(L, space: ProbabilitySpace) -> Generator:
    """Check the generator axioms and return a :class:`Generator`.

    Raises
    ------
    GeneratorValidationError
        Lists every violated axiom (row sums, self-adjointness, maximum
        principle, positive semidefiniteness) with its magnitude.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] != space.size:
        raise DomainError("rate matrix must be square and match the space")
    violations, _ = _axiom_report(L, space.mu)
    S = _symmetrized(L, space.mu) if not violations else 0.5 * (L + L.T)
    w = np.linalg.eigvalsh(S)
    if w.min() < -EIG_CLAMP * max(1.0, abs(w).max()):
        violations.append(("positive semidefinite", float(-w.min())))
    if violations:
        raise GeneratorValidationError(violations)
    return Generator(space, L, check=False)


def simple_generator(space: ProbabilitySpace, rate: float = 1.0) -> Generator:
    """``rate * (Id - E_mu)``: jump to a fresh sample of ``mu`` at exponential times."""
    n = space.size
    L = rate * (np.eye(n) - np.tile(space.mu, (n, 1)))
    return Generator(space, L, check=False)


def heat_operator(G: Generator, t: float, f):
    """``T_t f`` for ``t >= 0``.  Accepts a RealFunction or an array."""
    if t < 0 or not math.isfinite(t):
        raise DomainError("heat_operator needs a finite t >= 0")
    if isinstance(f, RealFunction):
        return RealFunction(f.space, G.heat(t, f.values))
    return G.heat(t, f)


def dirichlet_form(G: Generator, f, g, route: str = "matrix") -> float:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if route == "matrix":
        return G.dirichlet(f, g)
    if route == "pairs":
        return G.dirichlet_pairs(f, g)
    raise ValueError(f"unknown route {route!r}")


def spectral_gap(G, return_flag: bool = False):
    """Smallest eigenvalue of ``L`` on mean-zero functions.

    A zero value (reducible chain) issues :class:`ReducibleWarning`.  With
    ``return_flag`` the pair ``(gap, reducible)`` is returned.
    """
    if isinstance(G, TensorGenerator):
        gap = min(r * spectral_gap(f) for f, r in zip(G.factors, G.rates))
    else:
        w = G.eigenvalues
        gap = float(w[1]) if w.size > 1 else math.inf
        if gap <= EIG_CLAMP:
            gap = 0.0
    reducible = gap == 0.0
    if reducible:
        warnings.warn("generator is reducible; spectral gap is 0", ReducibleWarning, stacklevel=2)
    return (gap, reducible) if return_flag else gap


class TensorGenerator:
    """Kronecker sum ``sum_i r_i (Id x ... x L_i x ... x Id)``.

    States are ordered row-major: the last factor varies fastest.  Heat flows
    act factor by factor, so nothing of the full size is ever formed unless
    :meth:`materialize` is called.
    """

    def __init__(self, factors: Sequence[Generator], rates=None):
        self.factors = list(factors)
        if not self.factors:
            raise DomainError("need at least one factor")
        self.rates = [1.0] * len(self.factors) if rates is None else [float(r) for r in rates]
        if len(self.rates) != len(self.factors) or min(self.rates) < 0:
            raise DomainError("one nonnegative rate per factor")
        self.shape = tuple(f.size for f in self.factors)
        self.size = int(np.prod(self.shape))
        self._space = None
        self._mu = None

    @property
    def mu(self) -> np.ndarray:
        if self._mu is None:
            mu = np.ones(1)
            for f in self.factors:
                mu = np.kron(mu, f.space.mu)
            self._mu = mu
        return self._mu

    @property
    def space(self) -> ProbabilitySpace:
        if self._space is None:
            self._space = product_space([f.space for f in self.factors])
        return self._space

    def _along(self, mats, v):
        v = np.asarray(v, dtype=float).reshape(self.shape)
        for axis, M in enumerate(mats):
            if M is None:
                continue
            v = np.moveaxis(np.tensordot(M, v, axes=([1], [axis])), 0, axis)
        return v.reshape(-1)

    def heat(self, t: float, values) -> np.ndarray:
        mats = [f.heat_matrix(r * t) for f, r in zip(self.factors, self.rates)]
        return self._along(mats, values)

    def apply(self, values) -> np.ndarray:
        out = np.zeros(self.size)
        for k, (f, r) in enumerate(zip(self.factors, self.rates)):
            mats = [None] * len(self.factors)
            mats[k] = r * f.L
            out += self._along(mats, values)
        return out

    def dirichlet(self, f, g) -> float:
        return fsum_dot(self.mu * np.asarray(f, dtype=float), self.apply(g))

    def materialize(self) -> Generator:
        if self.size > MATERIALIZE_CAP:
            raise TooLargeError(f"{self.size} states exceeds the cap of {MATERIALIZE_CAP}")
        L = np.zeros((self.size, self.size))
        for k, (f, r) in enumerate(zip(self.factors, self.rates)):
            left = int(np.prod(self.shape[:k]))
            right = int(np.prod(self.shape[k + 1:]))
            L += r * np.kron(np.kron(np.eye(left), f.L), np.eye(right))
        return Generator(self.space, L, check=False)


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    space: ProbabilitySpace
    K: np.ndarray

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        if K.shape != (self.space.size, self.space.size):
            raise DomainError("kernel shape does not match the space")
        if K.min() < 0:
            raise DomainError("kernel entries must be nonnegative")
        if np.abs(K.sum(axis=1) - 1).max() > 1e-12:
            raise DomainError("kernel rows must sum to 1")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @property
    def nu(self) -> np.ndarray:
        return self.space.mu @ self.K

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "K": self.K.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MarkovKernel":
        return cls(ProbabilitySpace.from_dict(d["space"]), np.array(d["K"], dtype=float))


def kernel_alpha(K: MarkovKernel):
    """Smallest density ``K(x, y) / nu(y)`` over atoms of ``nu``, and ``-log(1 - alpha)``."""
    nu = K.nu
    cols = nu > 0
    alpha = float((K.K[:, cols] / nu[cols]).min())
    alpha = min(max(alpha, 0.0), 1.0)
    alpha_star = math.inf if alpha >= 1.0 else -math.log1p(-alpha)
    return alpha, alpha_star


def _simple_heat_unchecked(mu: np.ndarray, t: float) -> np.ndarray:
    # simple semigroup at any real time; not Markov for t < 0
    n = mu.size
    return math.exp(-t) * np.eye(n) + (-math.expm1(-t)) * np.tile(mu, (n, 1))


def kernel_decompose(K: MarkovKernel):
    """Split ``K = T_{alpha*} S`` with ``T`` the simple semigroup of the source measure.

    Returns
    -------
    S : MarkovKernel
    alpha_star : float
    """
    alpha, alpha_star = kernel_alpha(K)
    if alpha <= 0:
        raise DecompositionError("alpha = 0: no simple factor can be split off")
    if not math.isfinite(alpha_star):
        raise DecompositionError("alpha = 1: degenerate, K is the stationary jump itself")
    S = _simple_heat_unchecked(K.space.mu, -alpha_star) @ K.K
    # entries that should vanish exactly may come out as -1e-17
    S = np.where(np.abs(S) < 1e-14, 0.0, S)
    S = S / S.sum(axis=1, keepdims=True)
    return MarkovKernel(K.space, S), alpha_star


def recompose(S: MarkovKernel, alpha_star: float) -> np.ndarray:
    return _simple_heat_unchecked(S.space.mu, alpha_star) @ S.K


def random_generator(n: int, rng, density: float = 1.0, scale: float = 1.0) -> Generator:
    """Random reversible generator on ``n`` points.

    The measure is Dirichlet(1); conductances ``c_xy`` are exponential and
    kept with probability ``density`` (a path through all points is always
    kept so the chain is irreducible).  ``L_xy = -c_xy / mu_x``.
    """
    mu = rng.dirichlet(np.ones(n))
    C = rng.exponential(scale, size=(n, n))
    C = np.triu(C, 1)
    mask = np.triu(rng.random((n, n)) < density, 1)
    order = rng.permutation(n)
    mask[np.minimum(order[:-1], order[1:]), np.maximum(order[:-1], order[1:])] = True
    C = np.where(mask, C, 0.0)
    C = C + C.T
    L = -C / mu[:, None]
    L[np.diag_indices(n)] = 0.0
    L[np.diag_indices(n)] = -L.sum(axis=1)
    return Generator(ProbabilitySpace.from_weights(mu), L)
