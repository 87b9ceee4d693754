"""Approximate-membership filters with discrete configurations and b(eps) models.

Three families are supported:

* Bloom: ``k`` hash functions over ``bpe`` bits per element.  Model
  ``eps = (1 - exp(-k/bpe))^k`` and ``b = bpe``.
* Xor: ``f``-bit fingerprints in a 3-block table of ``1.23 n + 32`` cells.
  Model ``eps = 2^-f`` and ``b = 1.23 f``.
* Binary fuse: ``f``-bit fingerprints in a segmented table.  Model
  ``eps = 2^-f`` and ``b = 1.125 f`` (3-wise) or ``1.075 f`` (4-wise).

All filters consume the same 128-bit key hashes as the CSF, remixed with
their own seed.  Xor and fuse construction reuse :func:`linsys.peel`.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from . import linsys
from .hashing import derive_seed, fmix64, hash_keys, mulhi64, reduce32

KEY_HASH_SEED = 0
MAX_RETRIES = 16
XOR_FACTOR = 1.23
FUSE_FACTOR = {3: 1.125, 4: 1.075}
BLOOM_K = range(1, 9)
BLOOM_BPE = range(2, 25)
FINGERPRINT_BITS = range(1, 17)

MAGIC = b"AFLT"
VERSION = 1
_HEADER = struct.Struct("<4sHBBBBxxQQQIId")


class FilterBuildError(RuntimeError):
    pass


class FilterFamily(enum.IntEnum):
    # the integer order doubles as the tie-break order
    BLOOM = 0
    XOR = 1
    FUSE = 2

    @property
    def label(self) -> str:
        return {0: "bloom", 1: "xor", 2: "fuse"}[int(self)]


@dataclass(frozen=True)
class FilterSpec:
    """One discrete filter configuration together with its cost model."""

    family: FilterFamily
    k: int = 0
    bpe: float = 0.0
    f: int = 0
    arity: int = 3

    def __post_init__(self):
        object.__setattr__(self, "family", FilterFamily(self.family))
        if self.family is FilterFamily.BLOOM:
            if self.k < 1 or not self.bpe > 0:
                raise ValueError("Bloom needs k >= 1 and bpe > 0")
        else:
            if not 1 <= self.f <= 16:
                raise ValueError("fingerprint bits must be in 1..16")
            if self.family is FilterFamily.FUSE and self.arity not in FUSE_FACTOR:
                raise ValueError("binary fuse arity must be 3 or 4")

    @classmethod
    def bloom(cls, k: int, bpe: float) -> "FilterSpec":
        return cls(FilterFamily.BLOOM, k=int(k), bpe=float(bpe))

    @classmethod
    def xor(cls, f: int) -> "FilterSpec":
        return cls(FilterFamily.XOR, f=int(f))

    @classmethod
    def fuse(cls, f: int, arity: int = 3) -> "FilterSpec":
        return cls(FilterFamily.FUSE, f=int(f), arity=int(arity))

    @property
    def eps(self) -> float:
        if self.family is FilterFamily.BLOOM:
            return (1.0 - math.exp(-self.k / self.bpe)) ** self.k
        return 2.0 ** -self.f

    @property
    def bpk(self) -> float:
        if self.family is FilterFamily.BLOOM:
            return self.bpe
        if self.family is FilterFamily.XOR:
            return XOR_FACTOR * self.f
        return FUSE_FACTOR[self.arity] * self.f

    @property
    def label(self) -> str:
        if self.family is FilterFamily.BLOOM:
            bpe = f"{self.bpe:g}"
            return f"bloom(k={self.k},bpe={bpe})"
        if self.family is FilterFamily.XOR:
            return f"xor(f={self.f})"
        suffix = "" if self.arity == 3 else ",4-wise"
        return f"fuse(f={self.f}{suffix})"

    def __str__(self) -> str:
        return self.label


def _parse_family(token: str, fuse_arity: int) -> list[FilterSpec]:
    tok = token.strip().lower()
    if tok == "bloom":
        return [FilterSpec.bloom(k, b) for k in BLOOM_K for b in BLOOM_BPE]
    if tok.startswith("bloom-k"):
        k = int(tok[len("bloom-k"):])
        return [FilterSpec.bloom(k, b) for b in BLOOM_BPE]
    if tok == "xor":
        return [FilterSpec.xor(f) for f in FINGERPRINT_BITS]
    if tok in ("fuse", "binaryfuse", "binary-fuse"):
        return [FilterSpec.fuse(f, fuse_arity) for f in FINGERPRINT_BITS]
    raise ValueError(f"unknown filter family {token!r}")


def enumerate_specs(families: Iterable[str] = ("bloom", "xor", "fuse"), fuse_arity: int = 3) -> list[FilterSpec]:
    """The discrete grid for the given families.

    A family is ``bloom`` (k 1..8 x bpe 2..24), ``bloom-kN`` (one k),
    ``xor`` or ``fuse`` (f 1..16).
    """
    if isinstance(families, str):
        families = [families]
    out: list[FilterSpec] = []
    seen = set()
    for fam in families:
        for spec in _parse_family(fam, fuse_arity):
            if spec not in seen:
                seen.add(spec)
                out.append(spec)
    return out


# kernels


@nb.njit(cache=True)
def _bloom_insert(hashes, seed, k, m, words):
    s1 = derive_seed(seed, 1)
    s2 = derive_seed(seed, 2)
    for i in range(hashes.shape[0]):
        g1 = fmix64(hashes[i, 0] ^ s1)
        g2 = fmix64(hashes[i, 1] ^ s2) | np.uint64(1)
        for j in range(k):
            p = mulhi64(g1 + np.uint64(j) * g2, np.uint64(m))
            words[p >> np.uint64(6)] |= np.uint64(1) << (p & np.uint64(63))


@nb.njit(cache=True)
def _bloom_query(hashes, seed, k, m, words):
    n = hashes.shape[0]
    out = np.zeros(n, np.bool_)
    if m == 0:
        return out
    s1 = derive_seed(seed, 1)
    s2 = derive_seed(seed, 2)
    for i in range(n):
        g1 = fmix64(hashes[i, 0] ^ s1)
        g2 = fmix64(hashes[i, 1] ^ s2) | np.uint64(1)
        hit = True
        for j in range(k):
            p = mulhi64(g1 + np.uint64(j) * g2, np.uint64(m))
            if (words[p >> np.uint64(6)] >> (p & np.uint64(63))) & np.uint64(1) == 0:
                hit = False
                break
        out[i] = hit
    return out


@nb.njit(inline="always")
def _fingerprint(h2, seed, mask):
    return fmix64(h2 ^ derive_seed(seed, 3)) & mask


@nb.njit(inline="always")
def _xor_positions(h1, seed, block, out):
    x = fmix64(h1 ^ derive_seed(seed, 4))
    y = fmix64(x ^ derive_seed(seed, 5))
    out[0] = reduce32(x, block)
    out[1] = np.uint64(block) + reduce32(x >> np.uint64(32), block)
    out[2] = np.uint64(2 * block) + reduce32(y, block)


@nb.njit(inline="always")
def _fuse_positions(h1, seed, arity, seg_len, seg_count_len, out):
    x = fmix64(h1 ^ derive_seed(seed, 6))
    mask = np.uint64(seg_len - 1)
    h0 = mulhi64(x, np.uint64(seg_count_len))
    out[0] = h0
    out[1] = (h0 + np.uint64(seg_len)) ^ ((x >> np.uint64(18)) & mask)
    out[2] = (h0 + np.uint64(2 * seg_len)) ^ (x & mask)
    if arity == 4:
        out[3] = (h0 + np.uint64(3 * seg_len)) ^ ((x >> np.uint64(36)) & mask)


@nb.njit(cache=True)
def _table_equations(hashes, seed, family, arity, block, seg_len, seg_count_len, mask):
    n = hashes.shape[0]
    eqs = np.empty((n, arity), np.int64)
    fps = np.empty(n, np.uint64)
    pos = np.empty(arity, np.uint64)
    for i in range(n):
        if family == 1:
            _xor_positions(hashes[i, 0], seed, block, pos)
        else:
            _fuse_positions(hashes[i, 0], seed, arity, seg_len, seg_count_len, pos)
        for t in range(arity):
            eqs[i, t] = pos[t]
        fps[i] = _fingerprint(hashes[i, 1], seed, mask)
    return eqs, fps


@nb.njit(cache=True)
def _assign(eqs, fps, order_eq, order_var, length):
    table = np.zeros(length, np.uint64)
    r = eqs.shape[1]
    for i in range(order_eq.shape[0] - 1, -1, -1):
        e = order_eq[i]
        v = order_var[i]
        val = fps[e]
        for t in range(r):
            u = eqs[e, t]
            if u != v:
                val ^= table[u]
        table[v] = val
    return table


@nb.njit(cache=True)
def _pack(table, f):
    nbits = table.shape[0] * f
    words = np.zeros((nbits + 63) // 64, np.uint64)
    for i in range(table.shape[0]):
        p = i * f
        w = p >> 6
        o = p & 63
        words[w] |= table[i] << np.uint64(o)
        if o + f > 64:
            words[w + 1] |= table[i] >> np.uint64(64 - o)
    return words


@nb.njit(inline="always")
def _field(words, i, f, mask):
    p = i * np.uint64(f)
    w = p >> np.uint64(6)
    o = p & np.uint64(63)
    val = words[w] >> o
    if o + np.uint64(f) > np.uint64(64):
        val |= words[w + np.uint64(1)] << (np.uint64(64) - o)
    return val & mask


@nb.njit(cache=True)
def _table_query(hashes, seed, family, arity, f, block, seg_len, seg_count_len, length, words):
    n = hashes.shape[0]
    out = np.zeros(n, np.bool_)
    if length == 0:
        return out
    mask = (np.uint64(1) << np.uint64(f)) - np.uint64(1)
    pos = np.empty(arity, np.uint64)
    for i in range(n):
        if family == 1:
            _xor_positions(hashes[i, 0], seed, block, pos)
        else:
            _fuse_positions(hashes[i, 0], seed, arity, seg_len, seg_count_len, pos)
        acc = _fingerprint(hashes[i, 1], seed, mask)
        for t in range(arity):
            acc ^= _field(words, pos[t], f, mask)
        out[i] = acc == 0
    return out


# layout


def fuse_layout(n: int, arity: int = 3) -> tuple[int, int, int]:
    """Segment length, segment count and array length for ``n`` keys.

    Follows the sizing rules of the reference binary fuse implementation.
    """
    if n == 0:
        return 4, 0, 0
    size = max(n, 2)
    if arity == 3:
        seg_len = 1 << int(math.floor(math.log(size) / math.log(3.33) + 2.25))
        factor = max(1.125, 0.875 + 0.25 * math.log(1e6) / math.log(size))
    else:
        seg_len = 1 << int(math.floor(math.log(size) / math.log(2.91) - 0.5))
        factor = max(1.075, 0.77 + 0.305 * math.log(600000) / math.log(size))
    seg_len = max(4, min(seg_len, 1 << 18))
    capacity = int(round(size * factor))
    seg_count = max(1, -(-capacity // seg_len) - (arity - 1))
    length = (seg_count + arity - 1) * seg_len
    return seg_len, seg_count, length


def xor_layout(n: int) -> tuple[int, int]:
    """Block size and total length of an xor filter table."""
    if n == 0:
        return 0, 0
    capacity = int(math.floor(XOR_FACTOR * n)) + 32
    block = -(-capacity // 3)
    return block, 3 * block


# built filters


class BuiltFilter:
    """An immutable filter instance; query with key bytes or precomputed hashes."""

    def __init__(self, spec: FilterSpec, seed: int, n_inserted: int, words: np.ndarray,
                 length: int = 0, block: int = 0, seg_len: int = 0, seg_count: int = 0):
        self.spec = spec
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.n_inserted = int(n_inserted)
        self.words = np.ascontiguousarray(words, dtype=np.uint64)
        self.length = int(length)
        self.block = int(block)
        self.seg_len = int(seg_len)
        self.seg_count = int(seg_count)

    @property
    def size_bits(self) -> int:
        return 8 * _HEADER.size + 64 * int(self.words.size)

    @property
    def metadata_bits(self) -> int:
        return 8 * _HEADER.size

    def contains_hashes(self, hashes: np.ndarray) -> np.ndarray:
        hashes = np.ascontiguousarray(hashes, dtype=np.uint64)
        seed = np.uint64(self.seed)
        spec = self.spec
        if spec.family is FilterFamily.BLOOM:
            return _bloom_query(hashes, seed, spec.k, self.length, self.words)
        return _table_query(hashes, seed, int(spec.family), spec.arity, spec.f, self.block,
                            self.seg_len, self.seg_len * self.seg_count, self.length, self.words)

    def contains_many(self, keys) -> np.ndarray:
        return self.contains_hashes(hash_keys(keys, KEY_HASH_SEED))

    def __contains__(self, key: bytes) -> bool:
        return bool(self.contains_many([bytes(key)])[0])

    def to_bytes(self) -> bytes:
        s = self.spec
        header = _HEADER.pack(MAGIC, VERSION, int(s.family), s.arity, s.k, s.f, self.seed,
                              self.n_inserted, self.length, self.block, self.seg_len,
                              float(s.bpe))
        # seg_count is recomputed from n on load
        return header + self.words.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BuiltFilter":
        from .csf import FormatError

        if len(data) < _HEADER.size:
            raise FormatError("truncated filter header")
        magic, version, family, arity, k, f, seed, n, length, block, seg_len, bpe = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FormatError("not a filter container (bad magic)")
        if version != VERSION:
            raise FormatError(f"unsupported filter format version {version}")
        try:
            fam = FilterFamily(family)
            if fam is FilterFamily.BLOOM:
                spec = FilterSpec.bloom(k, bpe)
                nwords = -(-length // 64)
            else:
                spec = FilterSpec(fam, f=f, arity=arity)
                nwords = -(-length * f // 64)
        except ValueError as exc:
            raise FormatError(f"corrupt filter header: {exc}") from None
        if len(data) != _HEADER.size + 8 * nwords:
            raise FormatError("filter payload has the wrong length")
        words = np.frombuffer(data, dtype="<u8", offset=_HEADER.size).astype(np.uint64)
        seg_count = 0
        if fam is FilterFamily.FUSE:
            seg_len2, seg_count, length2 = fuse_layout(n, arity)
            if (seg_len2, length2) != (seg_len, length):
                raise FormatError("corrupt binary fuse layout")
        return cls(spec, seed, n, words, length, block, seg_len, seg_count)


def _build_bloom(spec: FilterSpec, hashes: np.ndarray, seed: int) -> BuiltFilter:
    n = hashes.shape[0]
    m = int(math.ceil(spec.bpe * n)) if n else 0
    words = np.zeros(-(-m // 64), dtype=np.uint64)
    if n:
        _bloom_insert(hashes, np.uint64(seed), spec.k, m, words)
    return BuiltFilter(spec, seed, n, words, length=m)


def _build_table(spec: FilterSpec, hashes: np.ndarray, seed: int) -> BuiltFilter:
    n = hashes.shape[0]
    fam = spec.family
    if fam is FilterFamily.XOR:
        block, length = xor_layout(n)
        seg_len = seg_count = 0
    else:
        seg_len, seg_count, length = fuse_layout(n, spec.arity)
        block = 0
    if n == 0:
        return BuiltFilter(spec, seed, 0, np.zeros(0, np.uint64), 0, block, seg_len, seg_count)
    mask = np.uint64((1 << spec.f) - 1)
    for attempt in range(MAX_RETRIES):
        s = int(derive_seed(np.uint64(seed), np.uint64(attempt))) if attempt else seed
        eqs, fps = _table_equations(hashes, np.uint64(s), int(fam), spec.arity, block,
                                    seg_len, seg_len * seg_count, mask)
        order_eq, order_var, _ = linsys.peel(eqs, length)
        if order_eq.size == n:
            table = _assign(eqs, fps, order_eq, order_var, length)
            words = _pack(table, spec.f)
            return BuiltFilter(spec, s, n, words, length, block, seg_len, seg_count)
    raise FilterBuildError(f"{spec.label}: peeling failed after {MAX_RETRIES} seeds")


def build_filter_hashed(spec: FilterSpec, hashes: np.ndarray, seed: int = 0) -> BuiltFilter:
    hashes = np.ascontiguousarray(hashes, dtype=np.uint64).reshape(-1, 2)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    if spec.family is FilterFamily.BLOOM:
        return _build_bloom(spec, hashes, seed)
    return _build_table(spec, hashes, seed)


def build_filter(spec: FilterSpec, keys, seed: int = 0) -> BuiltFilter:
    """Build ``spec`` over distinct ``keys`` (key bytes or a 2-D uint8 array)."""
    if isinstance(keys, np.ndarray) and keys.ndim == 2 and keys.dtype == np.uint8:
        hashes = hash_keys(keys, KEY_HASH_SEED)
    else:
        keys = [bytes(k) for k in keys]
        hashes = hash_keys(keys, KEY_HASH_SEED) if keys else np.zeros((0, 2), np.uint64)
    return build_filter_hashed(spec, hashes, seed)


def query_filter(bf: BuiltFilter, key: bytes) -> bool:
    return key in bf


def model_size_bits(spec: FilterSpec, n: int) -> float:
    """Model size ``b(eps) * n`` plus the fixed header."""
    return spec.bpk * n + 8 * _HEADER.size


def pick_specs(specs: Sequence[FilterSpec], family: FilterFamily) -> list[FilterSpec]:
    return [s for s in specs if s.family is family]
