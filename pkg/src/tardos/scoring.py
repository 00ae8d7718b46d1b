"""Accusation scores.

Per position, with ``g1 = sqrt((1 - p) / p)`` and ``g0 = sqrt(p / (1 - p))``:

    x  y   symmetric   asymmetric
    1  1     +g1          +g1
    0  1     -g0          -g0
    1  0     -g1           0
    0  0     +g0           0
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .codec import Codebook
from .errors import DomainError
from .params import Variant

_USER_BLOCK_ELEMENTS = 1 << 22


def symbol_score(x: int, y: int, p: float, variant: Variant | str = Variant.SYMMETRIC) -> float:
    if not 0 < p < 1:
        raise DomainError(f"bias must lie in (0, 1), got {p}")
    if x not in (0, 1) or y not in (0, 1):
        raise DomainError("symbols must be 0 or 1")
    if y == 0 and Variant(variant) is Variant.ASYMMETRIC:
        return 0.0
    mag = np.sqrt((1 - p) / p) if x else np.sqrt(p / (1 - p))
    return float(mag if x == y else -mag)


def score_matrix(bits: np.ndarray, y: np.ndarray, p: np.ndarray, variant: Variant | str) -> np.ndarray:
    """Per-entry scores for a block of codeword rows (vectorised ``symbol_score``)."""
    bits = np.asarray(bits, dtype=bool)
    y = np.asarray(y, dtype=bool)
    p = np.asarray(p, dtype=float)
    g1 = np.sqrt((1.0 - p) / p)
    g0 = np.sqrt(p / (1.0 - p))
    mag = np.where(bits, g1, g0)
    out = np.where(bits == y, mag, -mag)
    if Variant(variant) is Variant.ASYMMETRIC:
        out = np.where(y, out, 0.0)
    return out


def pairwise_sum(a: np.ndarray) -> np.ndarray:
    """Sum along the last axis with a tree whose shape depends only on its length."""
    a = np.asarray(a, dtype=float)
    while a.shape[-1] > 1:
        if a.shape[-1] % 2:
            a = np.concatenate([a, np.zeros(a.shape[:-1] + (1,))], axis=-1)
        a = a[..., 0::2] + a[..., 1::2]
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1])
    return a[..., 0]


def _forgery_bits(cb: Codebook, y) -> np.ndarray:
    bits = np.asarray(getattr(y, "bits", y))
    if bits.shape != (cb.ell,):
        raise DomainError(f"forgery length {bits.shape} does not match ell = {cb.ell}")
    if not np.all((bits == 0) | (bits == 1)):
        raise DomainError("forgery must be binary")
    return bits.astype(bool)


def score_users(cb: Codebook, y, users: Sequence[int], variant: Variant | str = Variant.SYMMETRIC) -> np.ndarray:
    yb = _forgery_bits(cb, y)
    users = list(users)
    out = np.empty(len(users))
    block = max(1, _USER_BLOCK_ELEMENTS // cb.ell)
    for start in range(0, len(users), block):
        chunk = users[start:start + block]
        out[start:start + len(chunk)] = pairwise_sum(score_matrix(cb.rows(chunk), yb, cb.biases, variant))
    return out


def score_all(cb: Codebook, y, variant: Variant | str = Variant.SYMMETRIC) -> np.ndarray:
    """Total score ``S_j`` of every user against forgery ``y``."""
    return score_users(cb, y, range(cb.n), variant)


@dataclass(frozen=True)
class AccusationReport:
    scores: np.ndarray
    threshold: float
    accused: tuple[int, ...]
    variant: Variant

    def to_dict(self) -> dict:
        return {
            "variant": Variant(self.variant).value,
            "threshold": self.threshold,
            "accused": list(self.accused),
            "scores": [float(s) for s in self.scores],
        }


def accuse(cb: Codebook, y, Z: float, variant: Variant | str = Variant.SYMMETRIC,
           scores: np.ndarray | None = None) -> AccusationReport:
    """Accuse every user whose score strictly exceeds ``Z``."""
    if not np.isfinite(Z):
        raise DomainError("threshold must be finite")
    if scores is None:
        scores = score_all(cb, y, variant)
    accused = tuple(int(j) for j in np.flatnonzero(scores > Z))
    return AccusationReport(scores=scores, threshold=float(Z), accused=accused, variant=Variant(variant))


def coalition_score(cb: Codebook, y, coalition: Iterable[int], variant: Variant | str = Variant.SYMMETRIC) -> float:
    members = sorted(set(int(j) for j in coalition))
    if not members:
        raise DomainError("coalition must be non-empty")
    if members[0] < 0 or members[-1] >= cb.n:
        raise IndexError(f"coalition index out of range for n = {cb.n}")
    return float(np.sum(score_users(cb, y, members, variant)))
