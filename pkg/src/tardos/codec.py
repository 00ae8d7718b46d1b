"""Bias sampling, codebook generation and the binary codebook file format.

File layout, little-endian throughout::

    magic   4s   b"TDCB"
    version u16  1
    n       u64
    ell     u64
    seed    u64
    delta   f64
    biases  f64 * ell
    rows    n * ceil(ell / 8) bytes, position i at byte i // 8, bit i % 8
    crc32   u32  over every preceding byte
"""

from __future__ import annotations

import math
import os
import struct
import zlib
from dataclasses import dataclass
from typing import BinaryIO, Callable, Optional, Sequence, Union

import numpy as np

from . import rng
from .errors import CapacityError, CodebookFormatError, DomainError
from .numerics import cutoff_angle

MAGIC = b"TDCB"
VERSION = 1
_HEADER = struct.Struct("<4sHQQQd")
_CRC = struct.Struct("<I")
DEFAULT_MAX_BYTES = 1 << 30
_BLOCK_ELEMENTS = 1 << 22


def bias_cdf(p, delta: float):
    """``F(p) = (2 arcsin(sqrt p) - 2 delta') / (pi - 4 delta')``."""
    dp = cutoff_angle(delta)
    return (2.0 * np.arcsin(np.sqrt(p)) - 2.0 * dp) / (math.pi - 4.0 * dp)


def sample_bias(u, delta: float):
    """Inverse of :func:`bias_cdf`: ``sin^2(delta' + u (pi - 4 delta') / 2)``.

    Accepts a scalar or an array of uniforms in [0, 1].
    """
    dp = cutoff_angle(delta)
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((u_arr >= 0) & (u_arr <= 1))):
        raise DomainError("uniforms must lie in [0, 1]")
    # sin^2(pi/4 + x/2) = (1 + sin x) / 2, centred so that u = 1/2 gives 1/2 exactly
    # and u, 1 - u give values summing to 1.
    p = 0.5 * (1.0 + np.sin((u_arr - 0.5) * (math.pi - 4.0 * dp)))
    p = np.where(u_arr == 0, delta, np.where(u_arr == 1, 1.0 - delta, np.clip(p, delta, 1.0 - delta)))
    if np.ndim(u) == 0:
        return float(p)
    return p


def packed_row_bytes(ell: int) -> int:
    return (ell + 7) // 8


@dataclass(frozen=True, eq=False)
class Codebook:
    """``n`` codewords of length ``ell`` with their per-position biases.

    ``packed`` holds one bit per entry, rows of ``ceil(ell / 8)`` bytes.
    """

    n: int
    ell: int
    delta: float
    seed: int
    biases: np.ndarray
    packed: np.ndarray

    def __post_init__(self):
        if self.n < 1 or self.ell < 1:
            raise DomainError("codebook needs n >= 1 and ell >= 1")
        if self.biases.shape != (self.ell,):
            raise DomainError("bias vector length differs from ell")
        if self.packed.shape != (self.n, packed_row_bytes(self.ell)) or self.packed.dtype != np.uint8:
            raise DomainError("packed matrix has the wrong shape or dtype")
        self.biases.setflags(write=False)
        self.packed.setflags(write=False)

    def matrix(self) -> np.ndarray:
        """Unpacked ``n x ell`` boolean matrix."""
        return self.rows(range(self.n))

    def rows(self, users: Sequence[int]) -> np.ndarray:
        users = np.asarray(list(users), dtype=np.int64)
        if users.size and (users.min() < 0 or users.max() >= self.n):
            raise IndexError(f"user index out of range for n = {self.n}")
        bits = np.unpackbits(self.packed[users], axis=1, count=self.ell, bitorder="little")
        return bits.astype(bool)

    def row(self, user: int) -> np.ndarray:
        return self.rows([user])[0]

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return (self.n, self.ell, self.delta, self.seed) == (other.n, other.ell, other.delta, other.seed) \
            and np.array_equal(self.biases, other.biases) and np.array_equal(self.packed, other.packed)

    __hash__ = None


def generate_codebook(
    n: int,
    ell: int,
    delta: float,
    seed: int,
    *,
    bias_uniforms: Optional[Callable[[int], np.ndarray]] = None,
    max_bytes: int = DEFAULT_MAX_BYTES,
) -> Codebook:
    """Draw biases and codewords from the streams of ``seed``.

    ``X[j, i] = 1`` iff the ``i``-th uniform of user ``j``'s stream is below
    ``p_i``.  ``bias_uniforms`` replaces the bias stream (testing hook).
    """
    if n < 1 or ell < 1:
        raise DomainError("n and ell must be positive")
    row_bytes = packed_row_bytes(ell)
    if n * row_bytes + 8 * ell > max_bytes:
        raise CapacityError(f"codebook n={n}, ell={ell} exceeds the budget of {max_bytes} bytes")
    seed = int(seed) & rng.MASK64
    if bias_uniforms is None:
        u = rng.uniforms(rng.derive(seed, rng.TAG_BIAS), ell)
    else:
        u = np.asarray(bias_uniforms(ell), dtype=float)
    biases = np.asarray(sample_bias(u, delta), dtype=float).reshape(ell)

    packed = np.empty((n, row_bytes), dtype=np.uint8)
    block = max(1, _BLOCK_ELEMENTS // ell)
    for start in range(0, n, block):
        stop = min(n, start + block)
        keys = [rng.derive(seed, rng.TAG_ENTRY, j) for j in range(start, stop)]
        draws = rng.uniform_rows(keys, ell)
        packed[start:stop] = np.packbits(draws < biases, axis=1, bitorder="little")
    return Codebook(n=n, ell=ell, delta=float(delta), seed=seed, biases=biases, packed=packed)


def gen_codebook(n: int, scheme, seed: int, **kwargs) -> Codebook:
    """Codebook for ``n`` users under a :class:`~tardos.params.SchemeParams`."""
    return generate_codebook(n, scheme.ell, scheme.delta, seed, **kwargs)


def codebook_to_bytes(cb: Codebook) -> bytes:
    body = b"".join((
        _HEADER.pack(MAGIC, VERSION, cb.n, cb.ell, cb.seed, cb.delta),
        cb.biases.astype("<f8").tobytes(),
        np.ascontiguousarray(cb.packed).tobytes(),
    ))
    return body + _CRC.pack(zlib.crc32(body))


def codebook_from_bytes(data: bytes) -> Codebook:
    if len(data) < _HEADER.size + _CRC.size:
        raise CodebookFormatError(f"file too short ({len(data)} bytes)")
    magic, version, n, ell, seed, delta = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CodebookFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CodebookFormatError(f"unsupported version {version}")
    if n < 1 or ell < 1:
        raise CodebookFormatError(f"invalid dimensions n={n}, ell={ell}")
    row_bytes = packed_row_bytes(ell)
    expected = _HEADER.size + 8 * ell + n * row_bytes + _CRC.size
    if len(data) != expected:
        raise CodebookFormatError(f"length {len(data)} does not match header (expected {expected})")
    (crc,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(data[:-_CRC.size]) != crc:
        raise CodebookFormatError("CRC32 mismatch")
    if not (0 < delta < 0.5):
        raise CodebookFormatError(f"invalid cutoff delta={delta}")
    off = _HEADER.size
    biases = np.frombuffer(data, dtype="<f8", count=ell, offset=off).astype(np.float64)
    if not np.all((biases >= delta) & (biases <= 1 - delta)):
        raise CodebookFormatError("bias outside [delta, 1 - delta]")
    off += 8 * ell
    packed = np.frombuffer(data, dtype=np.uint8, count=n * row_bytes, offset=off).reshape(n, row_bytes).copy()
    if ell % 8 and np.any(packed[:, -1] >> (ell % 8)):
        raise CodebookFormatError("non-zero padding bits")
    return Codebook(n=n, ell=ell, delta=delta, seed=seed, biases=biases, packed=packed)


PathOrFile = Union[str, os.PathLike, BinaryIO]


def write_codebook(cb: Codebook, sink: PathOrFile) -> None:
    data = codebook_to_bytes(cb)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(data)
    else:
        sink.write(data)


def read_codebook(source: PathOrFile) -> Codebook:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    return codebook_from_bytes(data)


__all__ = [
    "Codebook", "bias_cdf", "sample_bias", "generate_codebook", "gen_codebook",
    "write_codebook", "read_codebook", "codebook_to_bytes", "codebook_from_bytes",
]
