"""Compressed static function: exact key -> value retrieval in ~delta*E[l] bits/key.

Every key's canonical Huffman codeword is written into a random GF(2)
system, one equation per codeword bit.  Bit ``j`` of key ``k`` is the XOR
of ``arity`` positions derived from ``hash(k)``, ``j`` and the chunk seed.
A query recomputes those XORs bit by bit and feeds them to the canonical
decoder until a codeword completes.

Large systems are split into chunks of about ``CHUNK_EQUATIONS`` equations
by a separate hash of the key; each chunk is solved on its own and may be
reseeded independently.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Union

import numba as nb
import numpy as np

from . import linsys
from .dataset import KeyValueDataset, ValueHistogram
from .hashing import GOLDEN, derive_seed, fmix64, hash_keys, reduce32
from .huffman import CanonicalCode, build_code

KEY_HASH_SEED = 0
CHUNK_EQUATIONS = 10_000
SINGLE_CHUNK_LIMIT = 1 << 14
MAX_RETRIES = 64
_CHUNK_TAG = 0xC4A2

MAGIC = b"ACSF"
VERSION = 1
_HEADER = struct.Struct("<4sHBBBxQQIIQ")
_CHUNK_ENTRY = 5  # u32 end offset + u8 retry index


class BuildError(RuntimeError):
    """Construction failed after exhausting the reseed budget."""


class DecodeError(LookupError):
    """The bits stored for a key do not form a codeword (key not in the build set)."""


class FormatError(ValueError):
    """A serialized index is truncated, corrupt or of an unknown version."""


# kernels


@nb.njit(cache=True)
def _chunk_of(hashes, seed, n_chunks):
    out = np.zeros(hashes.shape[0], np.int64)
    if n_chunks == 1:
        return out
    s = derive_seed(seed, _CHUNK_TAG)
    for i in range(hashes.shape[0]):
        x = fmix64(hashes[i, 1] ^ s)
        out[i] = reduce32(x >> np.uint64(32), n_chunks)
    return out


@nb.njit(inline="always")
def _positions(h1, h2, cseed, j, nvars, arity, out):
    y1 = fmix64(h1 ^ fmix64(cseed + np.uint64(j) * GOLDEN))
    out[0] = reduce32(y1, nvars)
    out[1] = reduce32(y1 >> np.uint64(32), nvars)
    y2 = fmix64(h2 ^ y1)
    out[2] = reduce32(y2, nvars)
    if arity == 4:
        out[3] = reduce32(y2 >> np.uint64(32), nvars)


@nb.njit(cache=True)
def _chunk_system(hashes, codewords, lengths, cseed, nvars, arity, m):
    eqs = np.empty((m, arity), np.int64)
    rhs = np.empty(m, np.uint8)
    pos = np.empty(arity, np.uint64)
    e = 0
    for i in range(hashes.shape[0]):
        length = lengths[i]
        cw = codewords[i]
        for j in range(length):
            _positions(hashes[i, 0], hashes[i, 1], cseed, j, nvars, arity, pos)
            for t in range(arity):
                eqs[e, t] = pos[t]
            rhs[e] = (cw >> np.uint64(length - 1 - j)) & np.uint64(1)
            e += 1
    return eqs, rhs


@nb.njit(cache=True)
def _query_kernel(hashes, words, ends, retries, seed, n_chunks, arity,
                  first_code, count, sym_offset, symbols, l_max):
    n = hashes.shape[0]
    values = np.zeros(n, np.uint64)
    ok = np.zeros(n, np.bool_)
    pos = np.empty(arity, np.uint64)
    cs = derive_seed(seed, _CHUNK_TAG)
    for i in range(n):
        h1 = hashes[i, 0]
        h2 = hashes[i, 1]
        c = np.uint64(0)
        if n_chunks > 1:
            c = reduce32(fmix64(h2 ^ cs) >> np.uint64(32), n_chunks)
        base = np.uint64(0) if c == 0 else np.uint64(ends[c - np.uint64(1)])
        nvars = np.uint64(ends[c]) - base
        if nvars == 0:
            continue
        cseed = derive_seed(seed, (np.uint64(c) << np.uint64(8)) | np.uint64(retries[c]))
        acc = np.int64(0)
        for length in range(1, l_max + 1):
            _positions(h1, h2, cseed, length - 1, nvars, arity, pos)
            bit = np.uint64(0)
            for t in range(arity):
                p = base + pos[t]
                bit ^= (words[p >> np.uint64(6)] >> (p & np.uint64(63))) & np.uint64(1)
            acc = (acc << 1) | np.int64(bit)
            d = acc - first_code[length]
            if d >= 0 and d < count[length]:
                values[i] = symbols[sym_offset[length] + d]
                ok[i] = True
                break
    return values, ok


# planning


@dataclass(frozen=True)
class CsfPlan:
    """Everything that fixes an index's layout and size, before any solving."""

    code: CanonicalCode
    mode: linsys.DeltaMode
    seed: int
    n_keys: int
    chunk_equations: np.ndarray
    chunk_vars: np.ndarray

    @property
    def n_chunks(self) -> int:
        return int(self.chunk_vars.size)

    @property
    def total_equations(self) -> int:
        return int(self.chunk_equations.sum())

    @property
    def total_vars(self) -> int:
        return int(self.chunk_vars.sum())

    @property
    def size_bits(self) -> int:
        return _size_components(self.code, self.n_chunks, self.total_vars)["total"]


def _n_chunks(total_equations: int) -> int:
    if total_equations <= SINGLE_CHUNK_LIMIT:
        return 1
    return -(-total_equations // CHUNK_EQUATIONS)


def _choose_value_bits(values: np.ndarray, value_bits: Union[int, str]) -> int:
    if value_bits == "auto":
        return 32 if values.size == 0 or int(values.max()) < (1 << 32) else 64
    value_bits = int(value_bits)
    if value_bits == 32 and values.size and int(values.max()) >= (1 << 32):
        raise ValueError("values do not fit in 32 bits")
    return value_bits


def plan_csf(hashes: np.ndarray, values: np.ndarray, mode: linsys.DeltaMode = linsys.DELTA3,
             seed: int = 0, value_bits: Union[int, str] = "auto",
             code: Optional[CanonicalCode] = None):
    """Lay out an index without solving it.

    Returns ``(plan, per-key chunk ids, per-key ranks)``.
    """
    values = np.ascontiguousarray(values, dtype=np.uint64)
    if values.size == 0:
        raise ValueError("cannot build a CSF over zero keys")
    if code is None:
        vb = _choose_value_bits(values, value_bits)
        code = build_code(ValueHistogram.from_values(values), value_bits=vb)
    ranks = code.rank_of(values)
    lengths = code.lengths[ranks]
    total = int(lengths.sum())
    n_chunks = _n_chunks(total)
    chunk = _chunk_of(hashes, np.uint64(seed & 0xFFFFFFFFFFFFFFFF), n_chunks)
    m_c = np.bincount(chunk, weights=lengths, minlength=n_chunks).astype(np.int64)
    num, den = mode.delta.numerator, mode.delta.denominator
    v_c = (m_c * num + den - 1) // den
    if int(v_c.sum()) >= 1 << 32:
        raise BuildError("bit array too large for the 32-bit chunk table")
    plan = CsfPlan(code=code, mode=mode, seed=int(seed), n_keys=int(values.size),
                   chunk_equations=m_c, chunk_vars=v_c)
    return plan, chunk, ranks


def _size_components(code: CanonicalCode, n_chunks: int, total_vars: int) -> dict:
    n = code.n
    lfb = code.length_field_bits
    header = _HEADER.size * 8
    d_v = n * code.value_bits
    d_e = n * lfb
    d_e_padded = 8 * (-(-d_e // 8))
    chunk_table = n_chunks * _CHUNK_ENTRY * 8
    words = -(-total_vars // 64)
    array_bits = total_vars
    total = header + d_v + d_e_padded + chunk_table + 64 * words
    return {
        "array_bits": array_bits,
        "d_v": d_v,
        "d_e": d_e,
        "metadata_bits": total - array_bits - d_v - d_e,
        "total": total,
    }


# the index


class CsfIndex:
    """A built compressed static function."""

    def __init__(self, code: CanonicalCode, mode: linsys.DeltaMode, seed: int, n_keys: int,
                 ends: np.ndarray, retries: np.ndarray, words: np.ndarray):
        self.code = code
        self.mode = mode
        self.seed = int(seed)
        self.n_keys = int(n_keys)
        self.ends = np.ascontiguousarray(ends, dtype=np.uint32)
        self.retries = np.ascontiguousarray(retries, dtype=np.uint8)
        self.words = np.ascontiguousarray(words, dtype=np.uint64)

    @property
    def delta(self) -> float:
        return self.mode.value

    @property
    def n_chunks(self) -> int:
        return int(self.ends.size)

    @property
    def total_vars(self) -> int:
        return int(self.ends[-1]) if self.ends.size else 0

    @property
    def size_bits(self) -> int:
        return _size_components(self.code, self.n_chunks, self.total_vars)["total"]

    @property
    def bpk(self) -> float:
        return self.size_bits / self.n_keys

    def size_report(self) -> dict:
        parts = _size_components(self.code, self.n_chunks, self.total_vars)
        return {
            "array_bits": parts["array_bits"],
            "d_v": parts["d_v"],
            "d_e": parts["d_e"],
            "metadata_bits": parts["metadata_bits"],
            "size_bits": parts["total"],
            "bpk": parts["total"] / self.n_keys,
        }

    # queries

    def query_hashes(self, hashes: np.ndarray):
        """Batch lookup on precomputed key hashes; returns ``(values, ok)``."""
        c = self.code
        return _query_kernel(np.ascontiguousarray(hashes, dtype=np.uint64), self.words, self.ends,
                             self.retries, np.uint64(self.seed), self.n_chunks, self.mode.arity,
                             c.first_code, c.count, c.sym_offset, c.symbols, c.l_max)

    def query_many(self, keys):
        return self.query_hashes(hash_keys(keys, KEY_HASH_SEED))

    def query(self, key: bytes) -> int:
        values, ok = self.query_many([bytes(key)])
        if not ok[0]:
            raise DecodeError("key does not decode; it was not in the build set")
        return int(values[0])

    # serialization

    def to_bytes(self) -> bytes:
        c = self.code
        header = _HEADER.pack(MAGIC, VERSION, self.mode.arity, c.value_bits, c.length_field_bits,
                              self.n_keys, self.seed & 0xFFFFFFFFFFFFFFFF, c.n, self.n_chunks,
                              self.total_vars)
        vdtype = "<u4" if c.value_bits == 32 else "<u8"
        parts = [header, c.values.astype(vdtype).tobytes(), _pack_fields(c.lengths - 1, c.length_field_bits)]
        table = np.zeros(self.n_chunks, dtype=[("end", "<u4"), ("retry", "u1")])
        table["end"] = self.ends
        table["retry"] = self.retries
        parts.append(table.tobytes())
        parts.append(self.words.astype("<u8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CsfIndex":
        view = memoryview(data)
        if len(view) < _HEADER.size:
            raise FormatError("truncated CSF header")
        magic, version, arity, vbits, lfb, n_keys, seed, n, n_chunks, total_vars = _HEADER.unpack_from(view)
        if magic != MAGIC:
            raise FormatError("not a CSF container (bad magic)")
        if version != VERSION:
            raise FormatError(f"unsupported CSF format version {version}")
        if arity not in (3, 4) or vbits not in (32, 64) or n < 1 or n_chunks < 1:
            raise FormatError("corrupt CSF header")
        off = _HEADER.size
        vbytes = n * vbits // 8
        lbytes = -(-n * lfb // 8)
        tbytes = n_chunks * _CHUNK_ENTRY
        wcount = -(-total_vars // 64)
        need = off + vbytes + lbytes + tbytes + 8 * wcount
        if len(view) != need:
            raise FormatError(f"CSF container has {len(view)} bytes, expected {need}")
        values = np.frombuffer(view[off:off + vbytes], dtype="<u4" if vbits == 32 else "<u8").astype(np.uint64)
        off += vbytes
        lengths = _unpack_fields(bytes(view[off:off + lbytes]), lfb, n) + 1
        off += lbytes
        table = np.frombuffer(view[off:off + tbytes], dtype=[("end", "<u4"), ("retry", "u1")])
        off += tbytes
        words = np.frombuffer(view[off:off + 8 * wcount], dtype="<u8").astype(np.uint64)
        ends = table["end"].astype(np.uint32)
        if int(ends[-1]) != total_vars or np.any(np.diff(ends.astype(np.int64)) < 0):
            raise FormatError("corrupt CSF chunk table")
        try:
            code = CanonicalCode(values=values, lengths=lengths, value_bits=vbits)
        except ValueError as exc:
            raise FormatError(f"corrupt CSF codebook: {exc}") from None
        if code.kraft_sum() > 1.0:
            raise FormatError("corrupt CSF codebook: lengths violate Kraft")
        return cls(code, linsys.delta_mode(arity), seed, n_keys, ends, table["retry"].copy(), words)


def _pack_fields(fields: np.ndarray, width: int) -> bytes:
    if width == 0:
        return b""
    bits = ((fields[:, None] >> np.arange(width - 1, -1, -1)) & 1).astype(np.uint8)
    return np.packbits(bits.reshape(-1)).tobytes()


def _unpack_fields(data: bytes, width: int, n: int) -> np.ndarray:
    if width == 0:
        return np.zeros(n, dtype=np.int64)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: n * width].reshape(n, width)
    return (bits.astype(np.int64) << np.arange(width - 1, -1, -1)).sum(axis=1)


# construction


def build_csf_hashed(hashes: np.ndarray, values: np.ndarray, mode: linsys.DeltaMode = linsys.DELTA3,
                     seed: int = 0, value_bits: Union[int, str] = "auto") -> CsfIndex:
    """Build from precomputed ``(N, 2)`` key hashes and parallel values."""
    hashes = np.ascontiguousarray(hashes, dtype=np.uint64)
    values = np.ascontiguousarray(values, dtype=np.uint64)
    plan, chunk, ranks = plan_csf(hashes, values, mode, seed, value_bits)
    code = plan.code
    lengths = code.lengths[ranks]
    codewords = code.codewords[ranks]

    order = np.argsort(chunk, kind="stable")
    starts = np.searchsorted(chunk[order], np.arange(plan.n_chunks + 1))
    bits = np.zeros(plan.total_vars, dtype=np.uint8)
    retries = np.zeros(plan.n_chunks, dtype=np.uint8)
    ends = np.cumsum(plan.chunk_vars).astype(np.uint32)
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    for c in range(plan.n_chunks):
        sel = order[starts[c]:starts[c + 1]]
        m = int(plan.chunk_equations[c])
        nvars = int(plan.chunk_vars[c])
        if m == 0:
            continue
        base = int(ends[c]) - nvars
        h = hashes[sel]
        for r in range(MAX_RETRIES):
            cseed = np.uint64(derive_seed(s, np.uint64((c << 8) | r)))
            eqs, rhs = _chunk_system(h, codewords[sel], lengths[sel], cseed, nvars, mode.arity, m)
            try:
                x, *_ = linsys.solve_arrays(eqs, rhs, nvars)
            except linsys.UnsolvableError:
                continue
            bits[base:base + nvars] = x
            retries[c] = r
            break
        else:
            raise BuildError(f"chunk {c} unsolvable after {MAX_RETRIES} seeds")

    padded = np.zeros(-(-plan.total_vars // 64) * 64, dtype=np.uint8)
    padded[: plan.total_vars] = bits
    words = np.packbits(padded, bitorder="little").view("<u8").astype(np.uint64)
    return CsfIndex(code, mode, seed, plan.n_keys, ends, retries, words)


def build_csf(ds: KeyValueDataset, mode: linsys.DeltaMode = linsys.DELTA3, seed: int = 0,
              value_bits: Union[int, str] = "auto") -> CsfIndex:
    """Build a CSF mapping every key of ``ds`` to its value."""
    return build_csf_hashed(ds.hashes(KEY_HASH_SEED), ds.values, mode, seed, value_bits)


def query_csf(idx: CsfIndex, key: bytes) -> int:
    return idx.query(key)


def planned_size_bits(hashes: np.ndarray, values: np.ndarray, mode: linsys.DeltaMode = linsys.DELTA3,
                      seed: int = 0, value_bits: Union[int, str] = "auto") -> int:
    """Exact serialized size of the index :func:`build_csf_hashed` would produce."""
    plan, _, _ = plan_csf(np.ascontiguousarray(hashes, dtype=np.uint64), values, mode, seed, value_bits)
    return plan.size_bits
