"""Counter-based random streams derived from one 64-bit root seed.

Every random quantity is a pure function of ``(seed, tag, index)``:

    key(seed, tag, index) = mix64(seed ^ tag ^ index)
    uniform(key, i)       = (mix64(key ^ i) >> 11) * 2**-53

where ``mix64`` is the SplitMix64 output function (golden-ratio increment
followed by the finalizer).  Tags occupy the high 32 bits, indices the low
32 bits, so keys for different purposes never coincide.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TO_UNIT = 2.0**-53

TAG_BIAS = 0x62696173 << 32     # "bias"
TAG_ENTRY = 0x656E7472 << 32    # "entr"
TAG_ATTACK = 0x6174746B << 32   # "attk"
TAG_TRIAL = 0x7472696C << 32    # "tril"
MAX_INDEX = 1 << 32


def mix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive(seed: int, tag: int, index: int = 0) -> int:
    """Sub-seed for one purpose (``tag``) and one unit of work (``index``)."""
    if not 0 <= index < MAX_INDEX:
        raise ValueError(f"stream index {index} out of range")
    return mix64((int(seed) & MASK64) ^ tag ^ index)


def _mix64_array(x: np.ndarray) -> np.ndarray:
    z = x + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniforms(key: int, count: int, start: int = 0) -> np.ndarray:
    """``count`` uniforms in [0, 1) at counter positions ``start, start+1, ...``."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    bits = _mix64_array(idx ^ np.uint64(key & MASK64))
    return (bits >> np.uint64(11)).astype(np.float64) * _TO_UNIT


def uniform_rows(keys, count: int) -> np.ndarray:
    """One row of ``count`` uniforms per key, shape ``(len(keys), count)``."""
    keys = np.asarray(keys, dtype=np.uint64).reshape(-1, 1)
    bits = _mix64_array(keys ^ np.arange(count, dtype=np.uint64)[None, :])
    return (bits >> np.uint64(11)).astype(np.float64) * _TO_UNIT
