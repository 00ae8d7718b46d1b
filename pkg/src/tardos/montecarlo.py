"""Empirical soundness/completeness rates and numeric checks of proof identities."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from math import comb
from statistics import NormalDist
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import numerics, rng
from .attacks import ALL_STRATEGIES, Strategy, forge
from .codec import generate_codebook
from .errors import DomainError, ImplicationViolation, InfeasibleParamsError
from .params import (
    ParamSet, SchemeContext, SchemeParams, Variant, check_constraints, integral_adjust,
    optimize, optimize_generic,
)
from .scoring import AccusationReport, accuse, score_matrix

MOMENT_TOL = 1e-10
COALITION_F0_TOL = 1e-8
COALITION_F2_TOL = 1e-6
COALITION_F1_TOL = 1e-8
COALITION_MAX_C = 12


@dataclass(frozen=True)
class TrialConfig:
    n: int
    c: int
    eps1: float
    eps2: Optional[float] = None
    eta: Optional[float] = None
    strategy: Strategy = Strategy.INTERLEAVE
    trials: int = 2000
    base_seed: int = 0
    variant: Variant = Variant.SYMMETRIC
    params: Optional[ParamSet] = None
    shared_codebook: bool = False
    coalition_size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "variant", Variant(self.variant))
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError(f"trials must be a positive integer, got {self.trials}")
        if self.coalition_size is not None and not 1 <= self.coalition_size <= self.n:
            raise DomainError(f"coalition size must lie in [1, n], got {self.coalition_size}")
        self.context()  # validates n, c, eps1, eps2/eta

    def context(self) -> SchemeContext:
        return SchemeContext(n=self.n, c=self.c, eps1=self.eps1, eps2=self.eps2, eta=self.eta)

    @property
    def coalition(self) -> tuple[int, ...]:
        # Codewords are i.i.d., so the first users stand in for any coalition.
        return tuple(range(self.coalition_size or self.c))

    @property
    def undersized(self) -> bool:
        return len(self.coalition) < self.c

    def resolve_params(self) -> ParamSet:
        ctx = self.context()
        if self.params is not None:
            p = self.params
        elif self.variant is Variant.SYMMETRIC:
            p = optimize(ctx.c, ctx.eta)
        else:
            p = optimize_generic(ctx.c, ctx.eta, self.variant)
        if p.variant is not self.variant:
            raise DomainError(f"parameter set is {p.variant.value}, config is {self.variant.value}")
        slack = check_constraints(p, ctx.c, ctx.eta)
        if not slack.feasible:
            raise InfeasibleParamsError(f"parameters infeasible for c={ctx.c}, eta={ctx.eta}: {slack}")
        return p

    def scheme(self) -> SchemeParams:
        return integral_adjust(self.resolve_params(), self.context())[1]


@dataclass
class Tally:
    trials: int = 0
    sound_failures: int = 0
    complete_failures: int = 0
    over_threshold: int = 0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(self.trials + other.trials, self.sound_failures + other.sound_failures,
                     self.complete_failures + other.complete_failures, self.over_threshold + other.over_threshold)


@dataclass(frozen=True)
class ErrorEstimate:
    failures: int
    trials: int
    rate: float
    ci_low: float
    ci_high: float
    bound: float
    confidence: float = 0.95

    @property
    def within_bound(self) -> bool:
        """One-sided check: the interval does not lie entirely above the bound."""
        return self.ci_low <= self.bound


def wilson_interval(failures: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials < 1 or not 0 <= failures <= trials:
        raise DomainError(f"need 0 <= failures <= trials and trials >= 1, got {failures}/{trials}")
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    phat = failures / trials
    z2n = z * z / trials
    centre = (phat + z2n / 2.0) / (1.0 + z2n)
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2n / (4.0 * trials)) / (1.0 + z2n)
    low = 0.0 if failures == 0 else max(0.0, centre - half)
    high = 1.0 if failures == trials else min(1.0, centre + half)
    return low, high


def estimate(failures: int, trials: int, bound: float, confidence: float = 0.95) -> ErrorEstimate:
    low, high = wilson_interval(failures, trials, confidence)
    return ErrorEstimate(failures, trials, failures / trials, low, high, bound, confidence)


Tracer = Callable[..., AccusationReport]


def _trial(cfg: TrialConfig, scheme: SchemeParams, t: int, tracer: Tracer) -> Tally:
    seed = rng.derive(cfg.base_seed, rng.TAG_TRIAL, t)
    cb_seed = cfg.base_seed if cfg.shared_codebook else seed
    cb = generate_codebook(cfg.n, scheme.ell, scheme.delta, cb_seed)
    coalition = cfg.coalition
    y = forge(cfg.strategy, cb, coalition, seed)
    report = tracer(cb, y, scheme.Z, cfg.variant)
    accused = set(report.accused)
    members = set(coalition)
    caught = bool(accused & members)
    over = float(np.sum(report.scores[list(coalition)])) > len(coalition) * scheme.Z
    if over and not caught:
        raise ImplicationViolation(f"trial {t}: coalition score exceeds |C|*Z but nobody in C accused")
    return Tally(1, int(bool(accused - members)), int(not caught), int(over))


def _run_chunk(args) -> Tally:
    cfg, scheme, indices, tracer = args
    total = Tally()
    for t in indices:
        total = total + _trial(cfg, scheme, t, tracer)
    return total


def run_trials(cfg: TrialConfig, *, scheme: Optional[SchemeParams] = None, workers: int = 1,
               tracer: Tracer = accuse, progress: Optional[Callable[[int, int], None]] = None) -> Tally:
    """Run ``cfg.trials`` independent trials and count both failure kinds."""
    if scheme is None:
        scheme = cfg.scheme()
    chunk = max(1, min(250, math.ceil(cfg.trials / max(1, workers) / 4)))
    jobs = [(cfg, scheme, range(s, min(cfg.trials, s + chunk)), tracer) for s in range(0, cfg.trials, chunk)]
    total = Tally()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, jobs):
                total = total + part
                if progress:
                    progress(total.trials, cfg.trials)
    else:
        for job in jobs:
            total = total + _run_chunk(job)
            if progress:
                progress(total.trials, cfg.trials)
    return total


def run_soundness_trials(cfg: TrialConfig, **kwargs) -> ErrorEstimate:
    """Rate of trials accusing at least one innocent user."""
    tally = run_trials(cfg, **kwargs)
    return estimate(tally.sound_failures, tally.trials, cfg.eps1)


def run_completeness_trials(cfg: TrialConfig, **kwargs) -> ErrorEstimate:
    """Rate of trials accusing no colluder."""
    tally = run_trials(cfg, **kwargs)
    return estimate(tally.complete_failures, tally.trials, cfg.context().eps2)


CAMPAIGN_COLUMNS = (
    "variant", "strategy", "kind", "n", "c", "eta", "eps1", "eps2", "d_ell", "ell", "Z", "trials",
    "sound_failures", "complete_failures", "rate", "ci_low", "ci_high", "seed",
)


@dataclass
class CampaignResult:
    rows: list[dict] = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    undersized: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CAMPAIGN_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()


def run_campaign(cfg: TrialConfig, strategies: Sequence[Strategy | str] = ALL_STRATEGIES, *,
                 workers: int = 1, progress: Optional[Callable[[str, int, int], None]] = None) -> CampaignResult:
    """Soundness and completeness estimates for each strategy; two CSV rows per strategy."""
    scheme = cfg.scheme()
    ctx = cfg.context()
    result = CampaignResult(undersized=cfg.undersized)
    for strat in strategies:
        scfg = replace(cfg, strategy=Strategy(strat))
        cb = (lambda done, total, _s=scfg.strategy.value: progress(_s, done, total)) if progress else None
        tally = run_trials(scfg, scheme=scheme, workers=workers, progress=cb)
        sound = estimate(tally.sound_failures, tally.trials, ctx.eps1)
        complete = estimate(tally.complete_failures, tally.trials, ctx.eps2)
        result.estimates[scfg.strategy] = (sound, complete)
        for kind, est in (("soundness", sound), ("completeness", complete)):
            result.rows.append({
                "variant": cfg.variant.value, "strategy": scfg.strategy.value, "kind": kind,
                "n": ctx.n, "c": ctx.c, "eta": ctx.eta, "eps1": ctx.eps1, "eps2": ctx.eps2,
                "d_ell": scheme.source.d_ell, "ell": scheme.ell, "Z": scheme.Z, "trials": tally.trials,
                "sound_failures": tally.sound_failures, "complete_failures": tally.complete_failures,
                "rate": est.rate, "ci_low": est.ci_low, "ci_high": est.ci_high, "seed": cfg.base_seed,
            })
    return result


def innocent_moment_oracle(delta: float, y: int = 1, node_count: int = numerics.DEFAULT_NODES) -> tuple[float, float]:
    """``E[S_ji]`` and ``E[S_ji^2]`` for an innocent user, averaged over ``p`` and ``X_ji``."""
    if not 0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    yb = np.array([bool(y)])

    def moment(power):
        def per_p(p):
            hit = score_matrix(np.ones((p.size, 1), bool), yb, p[:, None], Variant.SYMMETRIC)[:, 0]
            miss = score_matrix(np.zeros((p.size, 1), bool), yb, p[:, None], Variant.SYMMETRIC)[:, 0]
            return p * hit**power + (1.0 - p) * miss**power
        return numerics.expect_under_f(per_p, delta, node_count)

    return moment(1), moment(2)


@dataclass(frozen=True)
class CoalitionMomentReport:
    c: int
    delta: float
    F0: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    F1_closed: np.ndarray
    sum_F0: float
    sum_F2: float

    @property
    def f0_ok(self) -> bool:
        return abs(self.sum_F0 - 1.0) <= COALITION_F0_TOL

    @property
    def f2_ok(self) -> bool:
        return abs(self.sum_F2 - self.c) <= COALITION_F2_TOL

    @property
    def f1_ok(self) -> bool:
        return bool(np.all(np.abs(self.F1 - self.F1_closed) <= COALITION_F1_TOL))

    @property
    def ok(self) -> bool:
        return self.f0_ok and self.f1_ok and self.f2_ok


def f1_closed_form(x: int, c: int, delta: float) -> float:
    dp = numerics.cutoff_angle(delta)
    return ((1 - delta) ** x * delta ** (c - x) - delta**x * (1 - delta) ** (c - x)) / (math.pi - 4 * dp)


def coalition_moment_oracle(c: int, delta: float, node_count: int = numerics.DEFAULT_NODES) -> CoalitionMomentReport:
    """Quadrature values of the coalition moment terms ``F0x, F1x, F2x`` for ``x = 0..c``.

    ``F_kx = E_p[p^x (1-p)^(c-x) (x q - (c-x)/q)^k]`` with ``q = sqrt((1-p)/p)``.
    """
    if int(c) != c or not 2 <= c <= COALITION_MAX_C:
        raise DomainError(f"c must be an integer in [2, {COALITION_MAX_C}], got {c}")
    if not 0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    F = np.zeros((3, c + 1))
    for x in range(c + 1):
        for k in range(3):
            def phi(p, x=x, k=k):
                q = np.sqrt((1 - p) / p)
                return p**x * (1 - p) ** (c - x) * (x * q - (c - x) / q) ** k
            F[k, x] = numerics.expect_under_f(phi, delta, node_count)
    binom = np.array([comb(c, x) for x in range(c + 1)], dtype=float)
    closed = np.array([f1_closed_form(x, c, delta) for x in range(c + 1)])
    return CoalitionMomentReport(c=c, delta=delta, F0=F[0], F1=F[1], F2=F[2], F1_closed=closed,
                           sum_F0=float(binom @ F[0]), sum_F2=float(binom @ F[2]))


# Name used by the original operation list.
appendix_b_oracle = coalition_moment_oracle


VERIFY_MOMENT_DELTAS = (1e-3, 1e-2, 0.1)
VERIFY_COALITION_GRID = tuple((c, d) for c in (2, 3, 5, 8) for d in (0.01, 0.1)) + ((2, 1 / 56.62),)


def verify_suite() -> list[dict]:
    """Run every oracle on the fixed grid; one record per cell."""
    out = []
    for d in VERIFY_MOMENT_DELTAS:
        for y in (0, 1):
            mean, second = innocent_moment_oracle(d, y)
            out.append({"check": "innocent_moments", "delta": d, "y": y, "mean": mean, "second": second,
                        "ok": abs(mean) <= MOMENT_TOL and abs(second - 1) <= MOMENT_TOL})
    for c, d in VERIFY_COALITION_GRID:
        rep = coalition_moment_oracle(c, d)
        out.append({"check": "coalition_moments", "c": c, "delta": d, "sum_F0": rep.sum_F0, "sum_F2": rep.sum_F2,
                    "max_F1_error": float(np.max(np.abs(rep.F1 - rep.F1_closed))), "ok": rep.ok})
    return out
