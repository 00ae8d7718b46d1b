"""Parameter algebra for the Tardos scheme.

A parameter set is the septuple ``(d_ell, d_z, d_delta, d_alpha, r, s, g)``.
Given a context ``(n, c, eps1, eps2)`` it yields

    ell = d_ell c^2 k,   Z = d_z c k,   delta = 1 / (d_delta c),   k = ln(n / eps1)

and the scheme is provably sound and complete whenever four inequalities hold:

    S1   d_alpha >= sqrt(d_delta) / (h(r) sqrt(c))
    S2   d_z / d_alpha - r d_ell / d_alpha^2 >= 1
    C1   (2 - 4/d_delta)/pi - h_inv(s) s / sqrt(d_delta c) >= g     (symmetric)
         (1 - 2/d_delta)/pi - h_inv(s) s / sqrt(d_delta c) >= g     (asymmetric)
    C2   g d_ell - d_z >= eta sqrt(d_delta / (s^2 c))
"""

from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from . import numerics
from .errors import (
    AdjustmentError,
    DomainError,
    InfeasibleCandidateError,
    InvalidCutoffError,
    NotAsymptoticError,
)

FEAS_TOL = 1e-9
ETA_CONSISTENCY_TOL = 1e-9
GAMMA = (2.0 / (3.0 * math.pi)) ** (2.0 / 3.0)

# Coarse grid for the (r, s, g) search.
GRID_R = (0.5, 4.0, 64)
GRID_S = (0.01, 25.0, 96)
GRID_G_MARGIN = 0.001
GRID_G_POINTS = 96
NM_RESTARTS = 3
NM_OPTIONS = {"xatol": 1e-12, "fatol": 1e-13, "maxiter": 40000, "maxfev": 80000}


class Variant(str, enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"

    def g_limit(self) -> float:
        return 2.0 / math.pi if self is Variant.SYMMETRIC else 1.0 / math.pi


@dataclass(frozen=True)
class ParamSet:
    d_ell: float
    d_z: float
    d_delta: float
    d_alpha: float
    r: float
    s: float
    g: float
    variant: Variant = Variant.SYMMETRIC

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        vals = self.septuple()
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"parameter set has non-finite entries: {vals}")
        if not self.d_delta > 1:
            raise DomainError(f"d_delta must exceed 1, got {self.d_delta}")
        if not self.r > 0.5:
            raise DomainError(f"r must exceed 1/2, got {self.r}")
        if min(self.d_ell, self.d_z, self.d_alpha, self.s) <= 0:
            raise DomainError("d_ell, d_z, d_alpha and s must be positive")
        if not 0 < self.g < self.variant.g_limit():
            raise DomainError(f"g = {self.g} outside (0, {self.variant.g_limit()}) for {self.variant.value}")

    def septuple(self) -> tuple[float, ...]:
        return (self.d_ell, self.d_z, self.d_delta, self.d_alpha, self.r, self.s, self.g)

    def to_dict(self) -> dict:
        return {
            "d_ell": self.d_ell, "d_z": self.d_z, "d_delta": self.d_delta, "d_alpha": self.d_alpha,
            "r": self.r, "s": self.s, "g": self.g, "variant": self.variant.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParamSet":
        return cls(**{k: data[k] for k in ("d_ell", "d_z", "d_delta", "d_alpha", "r", "s", "g")},
                   variant=data.get("variant", "symmetric"))


# Parameter sets quoted in the literature.  The Tardos set satisfies C2 only from c = 12 on.
TARDOS_ORIGINAL = ParamSet(100, 20, 300, 10, 1, 1, 0.25, Variant.ASYMMETRIC)
BLAYER_TASSA = ParamSet(85, 15, 40, 8, 0.611, 0.757, 0.2461, Variant.ASYMMETRIC)
SYMMETRIC_C2_ETA1 = ParamSet(23.79, 8.06, 28.31, 4.58, 0.67, 1.07, 0.49, Variant.SYMMETRIC)


def eta_from(eps1: float, eps2: float, n: int) -> float:
    """``ln(eps2) / ln(eps1 / n)``.

    Evaluated with base-10 logarithms (the ratio is base-free), which keeps
    decimal inputs such as ``(0.01, 0.01, 10**6)`` exact.
    """
    if not (0 < eps1 < 1 and 0 < eps2 < 1):
        raise DomainError("eps1 and eps2 must lie in (0, 1)")
    if n < 2:
        raise DomainError("n must be at least 2")
    return math.log10(eps2) / (math.log10(eps1) - math.log10(n))


@dataclass(frozen=True)
class SchemeContext:
    """Deployment context: ``n`` users, coalitions up to ``c``, error budgets."""

    n: int
    c: int
    eps1: float
    eps2: Optional[float] = None
    eta: Optional[float] = None

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 2:
            raise DomainError(f"c must be an integer >= 2, got {self.c}")
        if int(self.n) != self.n or self.n < self.c:
            raise DomainError(f"n must be an integer >= c, got n={self.n}, c={self.c}")
        if not 0 < self.eps1 < 1:
            raise DomainError(f"eps1 must lie in (0, 1), got {self.eps1}")
        if self.eps2 is None and self.eta is None:
            raise DomainError("either eps2 or eta must be given")
        if self.eps2 is not None:
            derived = eta_from(self.eps1, self.eps2, self.n)
            if self.eta is not None and abs(derived - self.eta) > ETA_CONSISTENCY_TOL:
                raise DomainError(f"eta = {self.eta} inconsistent with eps2 (implies {derived})")
            object.__setattr__(self, "eta", derived)
        else:
            if not 0 < self.eta <= 1:
                raise DomainError(f"eta must lie in (0, 1], got {self.eta}")
            object.__setattr__(self, "eps2", (self.eps1 / self.n) ** self.eta)
        if not 0 < self.eta <= 1:
            raise DomainError(f"eta must lie in (0, 1], got {self.eta}")

    @property
    def k(self) -> float:
        return math.log(self.n / self.eps1)


@dataclass(frozen=True)
class SchemeParams:
    ell: int
    Z: float
    delta: float
    delta_prime: float
    context: SchemeContext
    source: ParamSet
    ell0: float = field(default=math.nan)
    Z0: float = field(default=math.nan)
    adjusted: bool = False

    def __post_init__(self):
        if self.ell < 1:
            raise DomainError("ell must be at least 1")
        if not 0 < self.delta_prime < math.pi / 4:
            raise InvalidCutoffError(f"delta' = {self.delta_prime} outside (0, pi/4)")

    @property
    def alpha(self) -> float:
        """Soundness exponent ``1 / (d_alpha c)``; diagnostic only."""
        return 1.0 / (self.source.d_alpha * self.context.c)

    @property
    def beta(self) -> float:
        """Completeness exponent ``s sqrt(delta) / c``; diagnostic only."""
        return self.source.s * math.sqrt(self.delta) / self.context.c

    def to_dict(self) -> dict:
        ctx = self.context
        return {
            "n": ctx.n, "c": ctx.c, "eps1": ctx.eps1, "eps2": ctx.eps2, "eta": ctx.eta, "k": ctx.k,
            "ell0": self.ell0, "Z0": self.Z0, "ell": self.ell, "Z": self.Z,
            "delta": self.delta, "delta_prime": self.delta_prime,
            "alpha": self.alpha, "beta": self.beta, "adjusted": self.adjusted,
            "params": self.source.to_dict(),
        }


@dataclass(frozen=True)
class ConstraintSlack:
    s1: float
    s2: float
    c1: float
    c2: float

    @property
    def feasible(self) -> bool:
        return self.min() >= -FEAS_TOL

    def min(self) -> float:
        return min(self.s1, self.s2, self.c1, self.c2)

    def to_dict(self) -> dict:
        return {"s1": self.s1, "s2": self.s2, "c1": self.c1, "c2": self.c2, "feasible": self.feasible}


def _check_context(c: int, eta: float) -> None:
    if int(c) != c or c < 2:
        raise DomainError(f"c must be an integer >= 2, got {c}")
    if not 0 < eta <= 1:
        raise DomainError(f"eta must lie in (0, 1], got {eta}")


def c1_slack(d_delta: float, s: float, g: float, c: int, variant: Variant) -> float:
    lead = (2.0 - 4.0 / d_delta) if Variant(variant) is Variant.SYMMETRIC else (1.0 - 2.0 / d_delta)
    return lead / math.pi - numerics.h_inv_fn(s) * s / math.sqrt(d_delta * c) - g


def check_constraints(p: ParamSet, c: int, eta: float) -> ConstraintSlack:
    """Slacks (left side minus right side) of S1, S2, C1 and C2."""
    _check_context(c, eta)
    s1 = p.d_alpha - math.sqrt(p.d_delta) / (numerics.h_fn(p.r) * math.sqrt(c))
    s2 = p.d_z / p.d_alpha - p.r * p.d_ell / p.d_alpha**2 - 1.0
    c1 = c1_slack(p.d_delta, p.s, p.g, c, p.variant)
    c2 = p.g * p.d_ell - p.d_z - eta * math.sqrt(p.d_delta / (p.s**2 * c))
    return ConstraintSlack(s1, s2, c1, c2)


def candidate_from(r: float, s: float, g: float, c: int, eta: float) -> tuple[float, float, float, float]:
    """Optimal ``(d_delta, d_alpha, d_z, d_ell)`` for fixed ``(r, s, g)``, symmetric score.

    ``d_delta`` makes C1 tight, ``d_alpha`` is the smallest value allowed by S1
    and the minimiser of ``d_z`` under S2, and ``d_z``, ``d_ell`` make S2 and C2
    tight.
    """
    _check_context(c, eta)
    if not r > 0.5:
        raise DomainError(f"r must exceed 1/2, got {r}")
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    if not 0 < g < 2.0 / math.pi:
        raise DomainError(f"g must lie in (0, 2/pi), got {g}")
    a = numerics.h_inv_fn(s) * s / math.sqrt(c)
    root = math.sqrt(a * a + (16.0 / math.pi) * (2.0 / math.pi - g))
    d_delta = ((root + a) / (4.0 / math.pi - 2.0 * g)) ** 2
    w = math.sqrt(d_delta / (s * s * c))
    ratio = r / g
    d_alpha = max(
        math.sqrt(d_delta) / (numerics.h_fn(r) * math.sqrt(c)),
        ratio + math.sqrt(ratio * ratio + ratio * eta * w),
    )
    denom = g * d_alpha - r
    d_z = (g * d_alpha**2 + r * eta * w) / denom
    d_ell = (eta * w + d_z) / g
    out = (d_delta, d_alpha, d_z, d_ell)
    if denom <= 0 or not all(math.isfinite(v) and v > 0 for v in out) or d_delta <= 1:
        raise InfeasibleCandidateError(f"candidate for r={r}, s={s}, g={g} is invalid: {out}")
    return out


def _paramset_from(r: float, s: float, g: float, c: int, eta: float) -> ParamSet:
    d_delta, d_alpha, d_z, d_ell = candidate_from(r, s, g, c, eta)
    return ParamSet(d_ell, d_z, d_delta, d_alpha, r, s, g, Variant.SYMMETRIC)


def _grid_d_ell(c: int, eta: float) -> tuple[float, tuple[float, float, float]]:
    """Vectorised O1-O4 over the coarse grid; returns the best cell."""
    r = np.linspace(GRID_R[0], GRID_R[1], GRID_R[2] + 1)[1:]
    s = np.geomspace(GRID_S[0], GRID_S[1], GRID_S[2])
    g = np.linspace(GRID_G_MARGIN, 2.0 / math.pi - GRID_G_MARGIN, GRID_G_POINTS)
    hr = np.array([numerics.h_fn(float(x)) for x in r])[:, None, None]
    R, S, G = r[:, None, None], s[None, :, None], g[None, None, :]
    a = numerics.h_inv_array(s)[None, :, None] * S / math.sqrt(c)
    d_delta = ((np.sqrt(a * a + (16.0 / math.pi) * (2.0 / math.pi - G)) + a) / (4.0 / math.pi - 2.0 * G)) ** 2
    w = np.sqrt(d_delta / (S * S * c))
    ratio = R / G
    d_alpha = np.maximum(np.sqrt(d_delta) / (hr * math.sqrt(c)), ratio + np.sqrt(ratio * ratio + ratio * eta * w))
    d_z = (G * d_alpha**2 + R * eta * w) / (G * d_alpha - R)
    d_ell = (eta * w + d_z) / G
    d_ell = np.where(np.isfinite(d_ell) & (d_ell > 0), d_ell, np.inf)
    i, j, l = np.unravel_index(np.argmin(d_ell), d_ell.shape)
    return float(d_ell[i, j, l]), (float(r[i]), float(s[j]), float(g[l]))


def optimize(c: int, eta: float) -> ParamSet:
    """Symmetric septuple minimising ``d_ell`` for coalition bound ``c`` and ``eta``."""
    _check_context(c, eta)

    def objective(x):
        r, s, g = x
        if not (r > 0.5 and s > 0 and 0 < g < 2.0 / math.pi):
            return math.inf
        try:
            return candidate_from(r, s, g, c, eta)[3]
        except (InfeasibleCandidateError, DomainError, OverflowError):
            return math.inf

    _, x = _grid_d_ell(c, eta)
    best_x, best_f = np.array(x), objective(x)
    for _ in range(NM_RESTARTS + 1):
        res = minimize(objective, best_x, method="Nelder-Mead", options=NM_OPTIONS)
        if res.fun <= best_f:
            best_x, best_f = res.x, float(res.fun)
    r, s, g = (float(v) for v in best_x)
    return _paramset_from(r, s, g, c, eta)


def optimize_generic(c: int, eta: float, variant: Variant | str = Variant.SYMMETRIC) -> ParamSet:
    """Minimise ``d_ell`` directly over all seven parameters under the constraints.

    Does not use the closed forms; starts from the published parameter sets.
    The Blayer-Tassa set is feasible for every ``c >= 2`` and ``eta <= 1``
    (the constraints only weaken as ``c`` grows or ``eta`` shrinks).
    """
    _check_context(c, eta)
    variant = Variant(variant)
    g_hi = variant.g_limit()

    def slacks(v):
        d_ell, d_z, d_delta, d_alpha, r, s, g = v
        if not (r > 0.5 and s > 0 and d_delta > 1 and d_alpha > 0 and 0 < g < g_hi):
            return np.full(4, -1e3)
        try:
            sl = check_constraints(ParamSet(d_ell, d_z, d_delta, d_alpha, r, s, g, variant), c, eta)
        except (DomainError, OverflowError):
            return np.full(4, -1e3)
        return np.array([sl.s1, sl.s2, sl.c1, sl.c2])

    bounds = [(1.0, 1e3), (1e-2, 1e3), (1.0 + 1e-6, 1e6), (1e-2, 1e3),
              (0.5 + 1e-6, 10.0), (1e-3, 50.0), (1e-6, g_hi - 1e-9)]
    starts = [BLAYER_TASSA.septuple(), (100, 20, 300, 10, 1, 1, 0.25)]
    best: Optional[ParamSet] = None
    for x0 in starts:
        with warnings.catch_warnings():
            # SLSQP clips steps to the bounds and says so; harmless here.
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(lambda v: v[0], np.array(x0, dtype=float), method="SLSQP", bounds=bounds,
                           constraints=[{"type": "ineq", "fun": slacks}],
                           options={"maxiter": 2000, "ftol": 1e-14})
        try:
            cand = ParamSet(*(float(v) for v in res.x), variant=variant)
        except DomainError:
            continue
        if check_constraints(cand, c, eta).feasible and (best is None or cand.d_ell < best.d_ell):
            best = cand
    if best is None:
        raise InfeasibleCandidateError(f"no feasible {variant.value} parameter set found for c={c}, eta={eta}")
    return best


SWEEP_COLUMNS = ("c", "eta", "d_ell", "d_z", "d_delta", "d_alpha", "r", "s", "g")


def _sweep_cell(cell: tuple[int, float]) -> tuple:
    c, eta = cell
    p = optimize(c, eta)
    return (c, eta, p.d_ell, p.d_z, p.d_delta, p.d_alpha, p.r, p.s, p.g)


def sweep(c_values: Iterable[int], eta_values: Iterable[float], workers: int = 1) -> list[tuple]:
    """Optimal septuples over the ``c x eta`` grid, rows ordered by (eta, c)."""
    cells = [(int(c), float(e)) for e in eta_values for c in c_values]
    for c, e in cells:
        _check_context(c, e)
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(cell) for cell in cells]
    return sorted(rows, key=lambda row: (-row[1], row[0]))


class AsymptoticParams(NamedTuple):
    d_ell: float
    d_z: float
    d_delta: float
    g: float
    r: float
    s: float


def asymptotic_params(c: float, eta: float) -> AsymptoticParams:
    """Large-``c`` first-order parameters with every ``(1 + o(1))`` factor set to 1.

    An approximation, not a bound: for moderate ``c`` the result need not be
    feasible.
    """
    if not c >= 2:
        raise DomainError(f"c must be >= 2, got {c}")
    if not 0 < eta <= 1:
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    lc = math.log(c)
    t = eta / lc
    cr = c ** (-1.0 / 3.0)
    s_arg = 24.0 / (math.pi**2 * GAMMA) * t * c ** (1.0 / 3.0)
    if s_arg <= 1:
        raise NotAsymptoticError(f"c = {c} too small for eta = {eta}: s would be non-positive")
    d_delta = 4.0 / GAMMA * (1.0 - 3.0 * t) * c ** (1.0 / 3.0)
    if d_delta <= 1:
        raise NotAsymptoticError(f"c = {c} too small for eta = {eta}: d_delta = {d_delta}")
    return AsymptoticParams(
        d_ell=math.pi**2 / 2.0 * (1.0 + (3.0 * GAMMA + 18.0 * GAMMA * t) * cr),
        d_z=math.pi * (1.0 + (2.5 * GAMMA + 6.0 * GAMMA * t) * cr),
        d_delta=d_delta,
        g=2.0 / math.pi * (1.0 - (0.5 * GAMMA + 3.0 * GAMMA * t) * cr),
        r=0.5 * (1.0 + (2.0 * GAMMA - 6.0 * GAMMA * t) * cr),
        s=math.log(s_arg),
    )


def derive_scheme_params(p: ParamSet, ctx: SchemeContext) -> SchemeParams:
    """Real-valued ``ell0``, ``Z0`` and cutoff ``delta`` for a context.

    ``ell`` is ``ceil(ell0)`` but ``Z`` is left at ``Z0``; use
    :func:`integral_adjust` for parameters that keep the guarantees.
    """
    ell0 = p.d_ell * ctx.c**2 * ctx.k
    z0 = p.d_z * ctx.c * ctx.k
    delta = 1.0 / (p.d_delta * ctx.c)
    if not 0 < delta < 0.5:
        raise InvalidCutoffError(f"delta = {delta} outside (0, 1/2)")
    return SchemeParams(ell=max(1, math.ceil(ell0)), Z=z0, delta=delta,
                        delta_prime=math.asin(math.sqrt(delta)), context=ctx, source=p,
                        ell0=ell0, Z0=z0, adjusted=False)


def integral_adjust(p: ParamSet, ctx: SchemeContext) -> tuple[ParamSet, SchemeParams]:
    """Round the codelength up and raise ``Z`` so the constraints still hold."""
    base = derive_scheme_params(p, ctx)
    ell = math.ceil(base.ell0)
    gap = ell - base.ell0
    omega = p.d_ell * gap / base.ell0
    d_ell = p.d_ell + omega
    d_z = p.d_z + p.g * omega
    disc = d_z * d_z - 4.0 * p.r * d_ell
    if disc < 0:
        raise AdjustmentError(f"(d_z')^2 - 4 r d_ell' = {disc} < 0; input violates g d_z >= 4 r")
    adjusted = replace(p, d_ell=d_ell, d_z=d_z, d_alpha=(d_z + math.sqrt(disc)) / 2.0)
    z = base.Z0 + p.g / ctx.c * gap
    scheme = replace(base, ell=ell, Z=z, source=adjusted, adjusted=True)
    return adjusted, scheme


def default_workers() -> int:
    env = os.environ.get("TARDOS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
