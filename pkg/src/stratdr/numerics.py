"""Seeded random streams and the small amount of dense linear algebra we need."""

from __future__ import annotations

import hashlib
import struct

import numpy as np
from scipy import linalg
from scipy.special import expit, ndtri

from .errors import NotPositiveDefinite

PIVOT_FLOOR = 1e-12
_U64 = (1 << 64) - 1


def derive_stream_id(*keys: object) -> int:
    """Stable 64-bit key for a tuple of identifiers (ints, floats, strings).

    Independent of Python's hash randomization, so sub-streams are the same
    across processes and runs.
    """
    h = hashlib.blake2b(digest_size=8)
    for k in keys:
        if isinstance(k, float):
            h.update(b"f" + struct.pack("<d", k))
        elif isinstance(k, int):
            h.update(b"i" + (k & _U64).to_bytes(8, "little"))
        else:
            h.update(b"s" + str(k).encode())
        h.update(b"|")
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """Counter-based (Philox) random stream keyed by ``(seed, stream_id)``.

    Variates depend only on the key and the order of calls on this object.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= seed <= _U64 and 0 <= stream_id <= _U64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence([self.seed, self.stream_id])
        self._gen = np.random.Generator(np.random.Philox(ss))

    def substream(self, *keys: object) -> "RngStream":
        """Independent stream for a sub-task, keyed by ``keys`` (not call order)."""
        return RngStream(self.seed, derive_stream_id(self.stream_id, *keys))

    def uniform(self, count: int) -> np.ndarray:
        # 53-bit grid shifted by half a step: strictly inside (0, 1)
        k = self._gen.integers(0, 1 << 53, size=count, dtype=np.uint64)
        return (k.astype(np.float64) + 0.5) * 2.0**-53

    def standard_normal(self, count: int) -> np.ndarray:
        return ndtri(self.uniform(count))

    def logistic(self, count: int, scale: float = 1.0) -> np.ndarray:
        u = self.uniform(count)
        return scale * (np.log(u) - np.log1p(-u))

    def bernoulli(self, count: int, p: float = 0.5) -> np.ndarray:
        return (self.uniform(count) < p).astype(np.int8)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def sample_standard_normal(rng: RngStream, count: int) -> np.ndarray:
    """``count`` i.i.d. N(0, 1) draws by inverse-CDF transform."""
    if count < 0:
        raise ValueError("count must be non-negative")
    return rng.standard_normal(count)


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive definite ``a`` via Cholesky.

    Raises NotPositiveDefinite when a factorization pivot is <= 1e-12,
    which in practice means collinear regression features.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ValueError(f"non-conforming shapes {a.shape} and {b.shape}")
    try:
        low = linalg.cholesky(a, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(low) ** 2
    if pivots.min() <= PIVOT_FLOOR:
        raise NotPositiveDefinite(
            f"pivot {pivots.min():.3e} at index {int(pivots.argmin())} below {PIVOT_FLOOR}"
        )
    return linalg.cho_solve((low, True), b)


def sigmoid(z):
    """Logistic function; stable for large |z| (never NaN for finite input)."""
    return expit(z)
