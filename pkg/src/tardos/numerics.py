"""Scalar special functions and quadrature under the truncated arcsine density.

``h_inv_fn(x) = (e^x - 1 - x) / x^2`` maps (0, inf) onto (1/2, inf); ``h_fn`` is
its inverse.  ``expect_under_f`` integrates against the bias density

    f(p) = 1 / ((pi - 4 delta') sqrt(p (1 - p))),   p in [delta, 1 - delta]

after substituting ``p = sin(theta)**2``, which removes the endpoint
singularities and leaves a constant weight ``2 / (pi - 4 delta')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import BracketError, DomainError

# Tolerances of this module, kept in one place.
H_BRACKET = (0.0, 64.0)
H_SERIES_CUTOFF = 1e-2
BISECT_TOL = 1e-12
BISECT_MAX_ITER = 400
DEFAULT_NODES = 128
MIN_NODES = 16

# 1/(k+2)! for k = 0..8; the series of h_inv_fn around zero.
_SERIES = tuple(1.0 / math.factorial(k + 2) for k in range(9))


@dataclass(frozen=True)
class QuadratureSpec:
    """Fixed-order Gauss-Legendre rule on [-1, 1]."""

    node_count: int = DEFAULT_NODES

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < MIN_NODES:
            raise DomainError(f"node_count must be an integer >= {MIN_NODES}, got {self.node_count}")

    def rule(self) -> tuple[np.ndarray, np.ndarray]:
        return _legendre_rule(int(self.node_count))


@lru_cache(maxsize=16)
def _legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _h_inv_unchecked(x: float) -> float:
    if x < H_SERIES_CUTOFF:
        acc = 0.0
        for coef in reversed(_SERIES):
            acc = acc * x + coef
        return acc
    return (math.expm1(x) - x) / (x * x)


def h_inv_fn(x: float) -> float:
    """Return ``(e^x - 1 - x) / x^2`` for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"h_inv_fn requires x > 0, got {x}")
    return _h_inv_unchecked(float(x))


def h_inv_array(x) -> np.ndarray:
    """Vectorised ``h_inv_fn`` over positive arrays."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("h_inv_array requires all x > 0")
    small = x < H_SERIES_CUTOFF
    out = np.empty_like(x)
    xs = x[small]
    acc = np.zeros_like(xs)
    for coef in reversed(_SERIES):
        acc = acc * xs + coef
    out[small] = acc
    xl = x[~small]
    with np.errstate(over="ignore"):
        out[~small] = (np.expm1(xl) - xl) / (xl * xl)
    return out


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    """Find a sign change of ``f`` in ``[lo, hi]``.

    With ``tol=0`` the interval is halved until it cannot shrink any further
    in floating point.
    """
    if tol < 0:
        raise DomainError("tol must be non-negative")
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"f({lo}) = {flo} and f({hi}) = {fhi} have the same sign")
    if lo > hi:
        lo, hi, flo, fhi = hi, lo, fhi, flo
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)


@lru_cache(maxsize=4096)
def h_fn(lam: float) -> float:
    """Inverse of ``h_inv_fn``: the ``x > 0`` with ``h_inv_fn(x) == lam``."""
    if not lam > 0.5:
        raise DomainError(f"h_fn requires lambda > 1/2, got {lam}")
    lo, hi = H_BRACKET
    if _h_inv_unchecked(hi) < lam:
        raise DomainError(f"lambda = {lam} lies beyond the bracket of h_fn")
    return bisect(lambda x: _h_inv_unchecked(x) - lam, lo, hi, tol=0.0)


def cutoff_angle(delta: float) -> float:
    """``delta' = arcsin(sqrt(delta))``."""
    if not 0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    return math.asin(math.sqrt(delta))


def arcsine_nodes(delta: float, node_count: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``p_k`` and weights ``w_k`` with ``sum w_k phi(p_k) ~ E_f[phi]``."""
    dp = cutoff_angle(delta)
    nodes, weights = QuadratureSpec(node_count).rule()
    a, b = dp, 0.5 * math.pi - dp
    theta = 0.5 * (b - a) * nodes + 0.5 * (b + a)
    # d(theta) Jacobian (b - a)/2 times density weight 2/(pi - 4 delta').
    w = weights * (0.5 * (b - a)) * (2.0 / (math.pi - 4.0 * dp))
    return np.sin(theta) ** 2, w


def expect_under_f(phi: Callable, delta: float, node_count: int = DEFAULT_NODES) -> float:
    """Expectation of ``phi(p)`` with ``p`` drawn from the truncated arcsine law.

    ``phi`` receives a numpy array of bias values.
    """
    p, w = arcsine_nodes(delta, node_count)
    vals = np.broadcast_to(np.asarray(phi(p), dtype=float), p.shape)
    return float(np.dot(w, vals))
