"""Canonical Huffman codes over a value histogram.

Symbols are identified by their *rank* in the histogram (0 = most
frequent).  Codewords are assigned canonically by ``(length, rank)``, so a
codebook only needs the values and their lengths; decoding uses the usual
first-code-per-length tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numba as nb
import numpy as np

from .dataset import ValueHistogram

MAX_CODE_LENGTH = 58
VALUE_BITS = 64


class CorruptStreamError(ValueError):
    """A bit stream did not decode to any codeword."""


@nb.njit(cache=True)
def _huffman_depths(freqs_asc):
    """Code lengths for frequencies sorted in merge order (smallest first).

    Two-queue construction: leaves are consumed in the given order and
    internal nodes in creation order.  On equal weight a leaf is taken
    before an internal node.
    """
    n = freqs_asc.shape[0]
    if n == 1:
        out = np.ones(1, np.int64)
        return out
    total = 2 * n - 1
    weight = np.empty(total, np.int64)
    parent = np.full(total, -1, np.int64)
    for i in range(n):
        weight[i] = freqs_asc[i]
    leaf = 0
    inner = n
    nxt = n
    for _ in range(n - 1):
        pick = np.empty(2, np.int64)
        for s in range(2):
            if leaf < n and (inner >= nxt or weight[leaf] <= weight[inner]):
                pick[s] = leaf
                leaf += 1
            else:
                pick[s] = inner
                inner += 1
        weight[nxt] = weight[pick[0]] + weight[pick[1]]
        parent[pick[0]] = nxt
        parent[pick[1]] = nxt
        nxt += 1
    depth = np.zeros(total, np.int64)
    for node in range(total - 2, -1, -1):
        depth[node] = depth[parent[node]] + 1
    return depth[:n].copy()


def huffman_lengths(freqs: Sequence[int] | np.ndarray) -> np.ndarray:
    """Optimal code lengths for ``freqs`` given in rank order.

    Ties between equal frequencies merge the higher rank first, i.e. the
    lower rank is treated as the larger weight.  Depth is capped at
    :data:`MAX_CODE_LENGTH` by repeatedly halving (rounding up) the
    frequencies.
    """
    f = np.asarray(freqs, dtype=np.int64)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("need at least one frequency")
    if np.any(f <= 0):
        raise ValueError("frequencies must be positive")
    # merge order: ascending frequency, and among equals descending rank
    order = np.lexsort((-np.arange(f.size), f))
    while True:
        depths = _huffman_depths(f[order])
        if depths.max() <= MAX_CODE_LENGTH:
            break
        f = (f + 1) // 2
    lengths = np.empty(f.size, np.int64)
    lengths[order] = depths
    return lengths


def canonical_codewords(lengths: np.ndarray) -> np.ndarray:
    """Assign canonical codewords (as integers, MSB-first) to ``lengths``."""
    lengths = np.asarray(lengths, dtype=np.int64)
    order = np.lexsort((np.arange(lengths.size), lengths))
    codes = np.zeros(lengths.size, dtype=np.uint64)
    code = 0
    prev = int(lengths[order[0]])
    for idx in order:
        length = int(lengths[idx])
        code <<= length - prev
        prev = length
        codes[idx] = code
        code += 1
    return codes


@dataclass(frozen=True)
class CanonicalCode:
    """Canonical prefix code aligned with a histogram's entries.

    ``values[i]`` is encoded with ``lengths[i]`` bits as ``codewords[i]``.
    """

    values: np.ndarray
    lengths: np.ndarray
    value_bits: int = VALUE_BITS
    codewords: np.ndarray = field(init=False, repr=False)
    # decoder tables, indexed by length 0..l_max
    first_code: np.ndarray = field(init=False, repr=False)
    count: np.ndarray = field(init=False, repr=False)
    sym_offset: np.ndarray = field(init=False, repr=False)
    symbols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.uint64)
        lengths = np.ascontiguousarray(self.lengths, dtype=np.int64)
        if values.shape != lengths.shape or values.size == 0:
            raise ValueError("values and lengths must be aligned and nonempty")
        if lengths.min() < 1:
            raise ValueError("code lengths must be >= 1")
        if self.value_bits not in (32, 64):
            raise ValueError("value_bits must be 32 or 64")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "codewords", canonical_codewords(lengths))

        l_max = int(lengths.max())
        count = np.bincount(lengths, minlength=l_max + 1).astype(np.int64)
        first = np.zeros(l_max + 1, dtype=np.int64)
        offset = np.zeros(l_max + 1, dtype=np.int64)
        code = 0
        seen = 0
        for length in range(1, l_max + 1):
            first[length] = code
            offset[length] = seen
            seen += count[length]
            code = (code + count[length]) << 1
        order = np.lexsort((np.arange(lengths.size), lengths))
        object.__setattr__(self, "first_code", first)
        object.__setattr__(self, "count", count)
        object.__setattr__(self, "sym_offset", offset)
        object.__setattr__(self, "symbols", values[order])

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def l_max(self) -> int:
        return int(self.lengths.max())

    @property
    def length_field_bits(self) -> int:
        """Bits per stored code length: ``ceil(log2(l_max))``."""
        return int(self.l_max - 1).bit_length()

    @property
    def d_e_bits(self) -> int:
        return self.n * self.length_field_bits

    @property
    def d_v_bits(self) -> int:
        return self.n * self.value_bits

    def rank_of(self, values: np.ndarray) -> np.ndarray:
        """Map values to their rank; every value must be in the codebook."""
        values = np.asarray(values, dtype=np.uint64)
        order = np.argsort(self.values, kind="stable")
        sorted_vals = self.values[order]
        pos = np.searchsorted(sorted_vals, values)
        pos = np.minimum(pos, sorted_vals.size - 1)
        if not np.array_equal(sorted_vals[pos], values):
            raise KeyError("value not in codebook")
        return order[pos]

    def encode(self, value: int) -> str:
        """Codeword of ``value`` as a '0'/'1' string."""
        rank = int(self.rank_of(np.array([value], dtype=np.uint64))[0])
        length = int(self.lengths[rank])
        return format(int(self.codewords[rank]), f"0{length}b")

    def kraft_sum(self) -> float:
        return float(np.sum(np.ldexp(1.0, -self.lengths)))


def build_code(h: ValueHistogram, value_bits: int = VALUE_BITS) -> CanonicalCode:
    """Huffman-optimal canonical code for ``h`` (one bit when ``n == 1``)."""
    lengths = huffman_lengths(h.freqs)
    return CanonicalCode(values=h.values, lengths=lengths, value_bits=value_bits)


def avg_code_length(code: CanonicalCode, h: ValueHistogram) -> float:
    """Mean bits per key, ``sum(f_i * l_i) / N``."""
    ranks = code.rank_of(h.values)
    return float(np.dot(h.freqs, code.lengths[ranks])) / h.N


class BitReader:
    """Iterate the bits of a '0'/'1' string or an int sequence, counting reads."""

    def __init__(self, bits: str | Iterable[int]):
        if isinstance(bits, str):
            bits = [1 if c == "1" else 0 for c in bits if c in "01"]
        self._it: Iterator[int] = iter(bits)
        self.consumed = 0

    def __iter__(self):
        return self

    def __next__(self) -> int:
        bit = next(self._it)
        self.consumed += 1
        return int(bit) & 1


def decode_prefix(code: CanonicalCode, reader: Iterable[int]) -> int:
    """Read one codeword from ``reader`` and return its value.

    Raises :class:`CorruptStreamError` when ``l_max`` bits (or the stream)
    run out without completing a codeword.
    """
    it = iter(reader)
    acc = 0
    for length in range(1, code.l_max + 1):
        try:
            acc = (acc << 1) | (next(it) & 1)
        except StopIteration:
            raise CorruptStreamError("bit stream ended inside a codeword") from None
        delta = acc - int(code.first_code[length])
        if 0 <= delta < code.count[length]:
            return int(code.symbols[code.sym_offset[length] + delta])
    raise CorruptStreamError(f"no codeword matched within {code.l_max} bits")
