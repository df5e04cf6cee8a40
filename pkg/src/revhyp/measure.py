"""
Finite probability spaces and functions on them.

Everything here is immutable and pure: a :class:`ProbabilitySpace` holds
labels and strictly positive weights, a :class:`RealFunction` holds values
indexed by the points of a space.  The extended p-"norms" accept any real
exponent, including zero and negative ones, for strictly positive functions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

MAX_POINTS = 10**6
WEIGHT_TOL = 1e-12
# below this |p| the log-mean formula loses precision; use the 2nd order series
SERIES_BAND = 1e-8


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


def fsum_dot(w, x) -> float:
    """Compensated sum of ``w * x``."""
    return math.fsum(np.multiply(w, x).tolist())


@dataclass(frozen=True, eq=False)
class ProbabilitySpace:
    labels: tuple
    mu: np.ndarray

    def __post_init__(self):
        labels = tuple(_freeze(lab) for lab in self.labels)
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if len(labels) == 0:
            raise DomainError("a probability space needs at least one point")
        if len(labels) != mu.size:
            raise DomainError(f"{len(labels)} labels but {mu.size} weights")
        if mu.size > MAX_POINTS:
            raise DomainError(f"spaces are capped at {MAX_POINTS} points")
        if len(set(labels)) != len(labels):
            raise DomainError("labels must be unique")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise DomainError("every weight must be strictly positive")
        total = math.fsum(mu.tolist())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise DomainError(f"weights sum to {total!r}, not 1")
        mu.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "mu", mu)

    @property
    def size(self) -> int:
        return self.mu.size

    def __len__(self):
        return self.mu.size

    def __eq__(self, other):
        if not isinstance(other, ProbabilitySpace):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.mu, other.mu)

    def __hash__(self):
        return hash((self.labels, self.mu.tobytes()))

    def index(self, label) -> int:
        return self.labels.index(_freeze(label))

    def expect(self, values) -> float:
        values = np.asarray(values, dtype=float)
        if values.shape != self.mu.shape:
            raise DomainError("function length does not match the space")
        return fsum_dot(self.mu, values)

    def measure(self, indices: Iterable[int]) -> float:
        idx = sorted(set(int(i) for i in indices))
        return math.fsum(self.mu[idx].tolist())

    @classmethod
    def uniform(cls, n_or_labels) -> "ProbabilitySpace":
        labels = list(range(n_or_labels)) if isinstance(n_or_labels, int) else list(n_or_labels)
        n = len(labels)
        return cls(tuple(labels), np.full(n, 1.0 / n))

    @classmethod
    def two_point(cls, alpha: float) -> "ProbabilitySpace":
        """Space ``{0, 1}`` with ``mu{0} = alpha``."""
        return cls((0, 1), np.array([alpha, 1.0 - alpha]))

    @classmethod
    def from_weights(cls, weights, labels=None) -> "ProbabilitySpace":
        w = np.asarray(weights, dtype=float)
        w = w / math.fsum(w.tolist())
        labels = tuple(range(w.size)) if labels is None else tuple(labels)
        return cls(labels, w)

    def to_dict(self) -> dict:
        return {"labels": [_thaw(lab) for lab in self.labels], "mu": self.mu.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ProbabilitySpace":
        return cls(tuple(d["labels"]), np.array(d["mu"], dtype=float))


def product_space(spaces: Sequence[ProbabilitySpace]) -> ProbabilitySpace:
    """Product space, row-major (last factor varies fastest)."""
    labels = [()]
    mu = np.ones(1)
    for sp in spaces:
        labels = [lab + (x,) for lab in labels for x in sp.labels]
        mu = np.kron(mu, sp.mu)
    mu = mu / math.fsum(mu.tolist())
    return ProbabilitySpace(tuple(labels), mu)


@dataclass(frozen=True, eq=False)
class RealFunction:
    space: ProbabilitySpace
    values: np.ndarray
    positive: bool = field(init=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.space.size:
            raise DomainError(f"function has {v.size} values, space has {self.space.size} points")
        if not np.all(np.isfinite(v)):
            raise DomainError("function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "positive", bool(v.min() > 0))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def mean(self) -> float:
        return self.space.expect(self.values)

    def map(self, fn) -> "RealFunction":
        return RealFunction(self.space, fn(self.values))

    @classmethod
    def constant(cls, space: ProbabilitySpace, c: float) -> "RealFunction":
        return cls(space, np.full(space.size, float(c)))

    @classmethod
    def indicator(cls, space: ProbabilitySpace, indices) -> "RealFunction":
        v = np.zeros(space.size)
        v[list(indices)] = 1.0
        return cls(space, v)


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, RealFunction) else np.asarray(f, dtype=float)


def _mu(f, space) -> np.ndarray:
    if isinstance(f, RealFunction):
        return f.space.mu
    if space is None:
        raise TypeError("a ProbabilitySpace is required for raw arrays")
    return space.mu


def holder_conjugate(p: float) -> float:
    """Extended Hoelder conjugate ``p/(p-1)`` with ``0' = 0``."""
    p = float(p)
    if not math.isfinite(p):
        raise DomainError("exponent must be finite")
    if p == 1.0:
        raise DomainError("1 has no Hoelder conjugate")
    if p == 0.0:
        return 0.0
    return p / (p - 1.0)


def log_p_norm(f, p: float, space: ProbabilitySpace | None = None) -> float:
    """``log ||f||_p`` for any finite real ``p``.

    For ``p < 1`` the function must be strictly positive.  The computation
    goes through ``(1/p) log E exp(p log f)`` with a log-sum-exp, and through
    the series ``E log f + (p/2) Var(log f)`` when ``|p| < 1e-8``.
    """
    v = _values(f)
    mu = _mu(f, space)
    p = float(p)
    if not math.isfinite(p):
        raise DomainError("exponent must be finite")
    if p < 1:
        if v.min() <= 0:
            raise DomainError(f"p = {p} < 1 requires a strictly positive function")
        u = np.log(v)
    else:
        a = np.abs(v)
        if a.max() == 0:
            return -math.inf
        with np.errstate(divide="ignore"):
            u = np.log(a)
    if p == 0.0:
        return fsum_dot(mu, u)
    if abs(p) < SERIES_BAND:
        m = fsum_dot(mu, u)
        var = fsum_dot(mu, (u - m) ** 2)
        return m + 0.5 * p * var
    return float(logsumexp(p * u, b=mu)) / p


def p_norm(f, p: float, space: ProbabilitySpace | None = None) -> float:
    """Extended p-norm: ``(E|f|^p)^(1/p)``, ``exp(E log f)`` at ``p = 0``."""
    return math.exp(log_p_norm(f, p, space))


def entropy(f, space: ProbabilitySpace | None = None) -> float:
    """``Ent(f) = E f log f - E f log E f`` for strictly positive ``f``.

    Evaluated as ``E[m h(f/m)]`` with ``h(x) = x log x - x + 1 >= 0`` and
    ``m = E f``, which keeps near-constant inputs accurate.
    """
    v = _values(f)
    mu = _mu(f, space)
    if v.min() <= 0:
        raise DomainError("entropy requires a strictly positive function")
    scale = v.max()
    x = v / scale
    m = fsum_dot(mu, x)
    d = (x - m) / m
    return scale * m * fsum_dot(mu, xlogx_excess(d))


def xlogx_excess(d) -> np.ndarray:
    """``(1+d) log(1+d) - d``, with a Taylor branch near ``d = 0``."""
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(d <= -1.0, 1.0, (1.0 + d) * np.log1p(np.maximum(d, -1.0)) - d)
    small = np.abs(d) < 1e-2
    if small.any():
        ds = d[small]
        # sum_k (-1)^k d^k / (k(k-1)), k >= 2
        acc = np.zeros_like(ds)
        for k in range(9, 1, -1):
            acc = acc * ds + (-1) ** k / (k * (k - 1))
        out[small] = acc * ds * ds
    return np.maximum(out, 0.0)


def variance(f, space: ProbabilitySpace | None = None) -> float:
    v = _values(f)
    mu = _mu(f, space)
    m = fsum_dot(mu, v)
    return fsum_dot(mu, (v - m) ** 2)


def covariance(f, g, space: ProbabilitySpace | None = None) -> float:
    a, b = _values(f), _values(g)
    mu = _mu(f, space)
    return fsum_dot(mu, (a - fsum_dot(mu, a)) * (b - fsum_dot(mu, b)))


# --- file formats -----------------------------------------------------------

def _freeze(x):
    return tuple(_freeze(y) for y in x) if isinstance(x, list) else x


def _thaw(x):
    return [_thaw(y) for y in x] if isinstance(x, tuple) else x


def load_space(path) -> ProbabilitySpace:
    return ProbabilitySpace.from_dict(json.loads(Path(path).read_text()))


def dump_space(space: ProbabilitySpace, path) -> None:
    Path(path).write_text(json.dumps(space.to_dict()))


def load_function(path, space: ProbabilitySpace) -> RealFunction:
    """Read a function as JSON (list, ``{"values": [...]}`` or label map) or as
    CSV with header ``label,value``."""
    text = Path(path).read_text()
    if str(path).endswith(".csv"):
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"label", "value"}:
            raise DomainError("function CSV needs the header 'label,value'")
        by_label = {r["label"]: float(r["value"]) for r in rows}
        return _from_label_map(by_label, space, stringly=True)
    data = json.loads(text)
    if isinstance(data, dict) and "values" in data:
        data = data["values"]
    if isinstance(data, dict):
        return _from_label_map(data, space, stringly=True)
    return RealFunction(space, np.asarray(data, dtype=float))


def _from_label_map(m: dict, space: ProbabilitySpace, stringly: bool) -> RealFunction:
    keyed = {str(_thaw(lab)) if stringly else lab: i for i, lab in enumerate(space.labels)}
    v = np.full(space.size, np.nan)
    for k, val in m.items():
        if k not in keyed:
            raise DomainError(f"unknown label {k!r}")
        v[keyed[k]] = float(val)
    if np.isnan(v).any():
        raise DomainError("function file does not cover every point")
    return RealFunction(space, v)
