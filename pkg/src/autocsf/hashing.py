"""Seeded 64/128-bit hashing primitives shared by every structure.

Keys are hashed exactly once into a pair of 64-bit words ``(h1, h2)``.
The CSF and the filters derive their positions and fingerprints from that
pair with their own seeds, so raw key bytes never reach the query path
twice.  All routines here are numba-jitted so that build and query
kernels can inline them.
"""

from __future__ import annotations

from typing import Sequence, Union

import numba as nb
import numpy as np

_FM1 = np.uint64(0xFF51AFD7ED558CCD)
_FM2 = np.uint64(0xC4CEB9FE1A85EC53)
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_P1 = np.uint64(0x87C37B91114253D5)
_P2 = np.uint64(0x4CF5AD432745937F)
_P3 = np.uint64(0x52DCE729DA3ED9B5)
_MASK32 = np.uint64(0xFFFFFFFF)

KeysLike = Union[np.ndarray, Sequence[bytes]]


@nb.njit(inline="always")
def fmix64(x):
    """MurmurHash3 finalizer; a bijection on uint64 with full avalanche."""
    x ^= x >> np.uint64(33)
    x *= _FM1
    x ^= x >> np.uint64(33)
    x *= _FM2
    x ^= x >> np.uint64(33)
    return x


@nb.njit(inline="always")
def rotl64(x, r):
    return (x << np.uint64(r)) | (x >> np.uint64(64 - r))


@nb.njit(inline="always")
def reduce32(x, n):
    """Map the low 32 bits of ``x`` onto ``[0, n)`` without division."""
    return ((x & _MASK32) * np.uint64(n)) >> np.uint64(32)


@nb.njit(inline="always")
def mulhi64(a, b):
    """High 64 bits of the 128-bit product ``a * b``."""
    a_lo = a & _MASK32
    a_hi = a >> np.uint64(32)
    b_lo = b & _MASK32
    b_hi = b >> np.uint64(32)
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> np.uint64(32)) + (hi_lo & _MASK32) + lo_hi
    return hi_hi + (hi_lo >> np.uint64(32)) + (cross >> np.uint64(32))


@nb.njit(inline="always")
def derive_seed(seed, tag):
    return fmix64(np.uint64(seed) ^ (np.uint64(tag) * GOLDEN))


@nb.njit(cache=True)
def _hash_buffer(buf, offsets, seed):
    n = offsets.shape[0] - 1
    out = np.empty((n, 2), np.uint64)
    s = np.uint64(seed)
    for i in range(n):
        lo = offsets[i]
        hi = offsets[i + 1]
        length = np.uint64(hi - lo)
        a = s ^ (length * _P1)
        b = fmix64(s + _P2) ^ length
        p = lo
        while p < hi:
            w = np.uint64(0)
            top = min(p + 8, hi)
            for t in range(p, top):
                w |= np.uint64(buf[t]) << np.uint64(8 * (t - p))
            a = fmix64(a ^ w) * _P3
            b = fmix64(b ^ rotl64(w, 29)) + a
            p += 8
        a = fmix64(a + b)
        b = fmix64(b ^ rotl64(a, 31) ^ _P1)
        out[i, 0] = a
        out[i, 1] = b
    return out


def hash_keys(keys: KeysLike, seed: int = 0) -> np.ndarray:
    """Hash keys to an ``(N, 2)`` uint64 array.

    ``keys`` is either a 2-D uint8 array (one fixed-width key per row) or a
    sequence of ``bytes``.  Both layouts hash the same bytes identically.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    if isinstance(keys, np.ndarray):
        if keys.ndim != 2 or keys.dtype != np.uint8:
            raise TypeError("key arrays must be 2-D uint8 (one key per row)")
        n, width = keys.shape
        buf = np.ascontiguousarray(keys).reshape(-1)
        offsets = np.arange(n + 1, dtype=np.int64) * width
    else:
        keys = list(keys)
        lengths = np.fromiter((len(k) for k in keys), dtype=np.int64, count=len(keys))
        offsets = np.zeros(len(keys) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        buf = np.frombuffer(b"".join(keys), dtype=np.uint8)
    return _hash_buffer(buf, offsets, np.uint64(seed))


@nb.njit(cache=True)
def _fmix_array(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = fmix64(x[i])
    return out


def mix64(x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`fmix64` over a uint64 array."""
    return _fmix_array(np.ascontiguousarray(x, dtype=np.uint64))
