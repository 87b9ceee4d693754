"""Key-value datasets, value histograms, synthetic workloads and k-mer tables."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .hashing import hash_keys, mix64

MAJORITY_VALUE = 0
ZIPF_SUPPORT = 1_000_000

_KMER_CODE = np.zeros(256, dtype=np.uint8)
for _i, _c in enumerate(b"ACGT"):
    _KMER_CODE[_c] = _i


class DatasetError(ValueError):
    pass


class KmerTableError(DatasetError):
    """Malformed k-mer count table; ``line`` is 1-based."""

    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class KeyValueDataset:
    """Distinct byte-string keys with parallel 64-bit values.

    Fixed-width keys are kept as an ``(N, w)`` uint8 array; variable-width
    keys as a list of ``bytes``.
    """

    def __init__(self, keys: Union[np.ndarray, Sequence[bytes]], values, check: bool = True):
        values = np.ascontiguousarray(values, dtype=np.uint64).reshape(-1)
        if isinstance(keys, np.ndarray):
            if keys.ndim != 2 or keys.dtype != np.uint8:
                raise DatasetError("key array must be 2-D uint8")
            keys = np.ascontiguousarray(keys)
            n_keys = keys.shape[0]
        else:
            keys = [bytes(k) for k in keys]
            n_keys = len(keys)
        if n_keys != values.size:
            raise DatasetError(f"{n_keys} keys but {values.size} values")
        if n_keys == 0:
            raise DatasetError("dataset must contain at least one pair")
        self.keys = keys
        self.values = values
        if check and not self._distinct():
            raise DatasetError("keys are not distinct")
        self._hash_cache: dict[int, np.ndarray] = {}

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[bytes, int]]) -> "KeyValueDataset":
        pairs = list(pairs)
        return cls([k for k, _ in pairs], [v for _, v in pairs])

    def _distinct(self) -> bool:
        if isinstance(self.keys, np.ndarray):
            rows = self.keys.view(np.dtype((np.void, self.keys.shape[1]))).reshape(-1)
            return np.unique(rows).size == rows.size
        return len(set(self.keys)) == len(self.keys)

    @property
    def N(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.N

    def key(self, i: int) -> bytes:
        if isinstance(self.keys, np.ndarray):
            return self.keys[i].tobytes()
        return self.keys[i]

    def hashes(self, seed: int = 0) -> np.ndarray:
        """Cached ``(N, 2)`` key hashes under ``seed``."""
        h = self._hash_cache.get(seed)
        if h is None:
            h = hash_keys(self.keys, seed)
            self._hash_cache[seed] = h
        return h

    def subset(self, mask_or_idx) -> "KeyValueDataset":
        idx = np.asarray(mask_or_idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        if isinstance(self.keys, np.ndarray):
            keys = self.keys[idx]
        else:
            keys = [self.keys[i] for i in idx]
        return KeyValueDataset(keys, self.values[idx], check=False)

    def histogram(self) -> "ValueHistogram":
        return histogram(self)


@dataclass(frozen=True)
class ValueHistogram:
    """Distinct values with their frequencies, most frequent first.

    Ties in frequency are ordered by ascending value, so ``values[0]`` is
    the deterministic majority value.
    """

    values: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        if self.values.size == 0 or self.values.shape != self.freqs.shape:
            raise DatasetError("histogram needs aligned, nonempty arrays")

    @classmethod
    def from_values(cls, values) -> "ValueHistogram":
        uniq, counts = np.unique(np.asarray(values, dtype=np.uint64), return_counts=True)
        order = np.argsort(-counts, kind="stable")
        return cls(values=uniq[order], freqs=counts[order].astype(np.int64))

    @classmethod
    def from_freqs(cls, freqs: Sequence[int]) -> "ValueHistogram":
        """Histogram whose values are the ranks 0..n-1 (handy for code tests)."""
        f = np.asarray(freqs, dtype=np.int64)
        order = np.argsort(-f, kind="stable")
        return cls(values=order.astype(np.uint64), freqs=f[order])

    @property
    def N(self) -> int:
        return int(self.freqs.sum())

    @property
    def n(self) -> int:
        return int(self.freqs.size)

    @property
    def majority_value(self) -> int:
        return int(self.values[0])

    @property
    def alpha(self) -> float:
        return float(self.freqs[0]) / self.N

    @property
    def h0(self) -> float:
        p = self.freqs / self.N
        return float(max(0.0, -np.sum(p * np.log2(p))))

    @property
    def entries(self) -> list[tuple[int, int]]:
        return [(int(v), int(f)) for v, f in zip(self.values, self.freqs)]


def histogram(ds: KeyValueDataset) -> ValueHistogram:
    return ValueHistogram.from_values(ds.values)


# minority laws


@dataclass(frozen=True)
class Unique:
    """Every minority key gets its own value."""

    name = "unique"


@dataclass(frozen=True)
class Zipf:
    s: float = 1.5
    name = "zipfian"

    def __post_init__(self):
        if not self.s > 0:
            raise DatasetError("Zipf exponent must be positive")


@dataclass(frozen=True)
class Uniform:
    m: int = 100
    name = "uniform"

    def __post_init__(self):
        if self.m < 1:
            raise DatasetError("Uniform needs at least one symbol")


Minority = Union[Unique, Zipf, Uniform]

DISTRIBUTIONS = {"uniform": Uniform(100), "zipfian": Zipf(1.5), "unique": Unique()}


def parse_distribution(name: str) -> Minority:
    key = name.strip().lower()
    aliases = {"uniform-100": "uniform", "uniform100": "uniform", "zipf": "zipfian"}
    key = aliases.get(key, key)
    if key not in DISTRIBUTIONS:
        raise DatasetError(f"unknown distribution {name!r}; choose from {sorted(DISTRIBUTIONS)}")
    return DISTRIBUTIONS[key]


def zipf_ranks(count: int, s: float, rng: np.random.Generator, support: int = ZIPF_SUPPORT) -> np.ndarray:
    """Draw 1-based ranks with ``P(r) ∝ r^-s`` over ``1..support`` by inverse CDF."""
    weights = np.arange(1, support + 1, dtype=np.float64) ** -s
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    u = rng.random(count)
    ranks = np.searchsorted(cdf, u, side="right") + 1
    return np.minimum(ranks, support).astype(np.uint64)


def synthetic_keys(N: int, seed: int, width: int = 8) -> np.ndarray:
    """``N`` distinct pseudorandom keys of ``width`` bytes (width >= 8)."""
    if width < 8:
        raise DatasetError("synthetic keys need at least 8 bytes to stay distinct")
    base = mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    # fmix64 is a bijection, so distinct counters give distinct keys
    ctr = np.arange(N, dtype=np.uint64) + base
    words = mix64(ctr)
    out = np.zeros((N, width), dtype=np.uint8)
    out[:, :8] = words.view(np.uint8).reshape(N, 8)
    return out


def gen_synthetic(N: int, alpha: float, minority: Minority, seed: int = 0) -> KeyValueDataset:
    """Majority value 0 on ``floor(alpha*N)`` keys, the rest drawn from ``minority``."""
    if N < 1:
        raise DatasetError("N must be >= 1")
    if not 0.0 <= alpha <= 1.0:
        raise DatasetError("alpha must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    f0 = math.floor(alpha * N + 1e-9)
    rest = N - f0
    if isinstance(minority, Unique):
        minor = np.arange(1, rest + 1, dtype=np.uint64)
    elif isinstance(minority, Zipf):
        minor = zipf_ranks(rest, minority.s, rng)
    elif isinstance(minority, Uniform):
        minor = rng.integers(1, minority.m + 1, size=rest).astype(np.uint64)
    else:
        raise DatasetError(f"unknown minority law {minority!r}")
    values = np.concatenate([np.full(f0, MAJORITY_VALUE, dtype=np.uint64), minor])
    values = values[rng.permutation(N)]
    return KeyValueDataset(synthetic_keys(N, seed), values, check=False)


# k-mer tables

_KMER_LINE = re.compile(rb"([^\t]*)\t([^\t]*)")


def pack_kmers(kmers: np.ndarray, k: int) -> np.ndarray:
    """Pack an ``(N, k)`` array of ASCII ACGT bytes into ``ceil(2k/8)`` bytes each.

    A=0, C=1, G=2, T=3; the first base lands in the most significant bits.
    """
    codes = _KMER_CODE[kmers].astype(np.uint8)
    width = -(-2 * k // 8)
    pad = width * 4 - k
    if pad:
        codes = np.concatenate([np.zeros((codes.shape[0], pad), np.uint8), codes], axis=1)
    codes = codes.reshape(codes.shape[0], width, 4)
    return (codes[:, :, 0] << 6) | (codes[:, :, 1] << 4) | (codes[:, :, 2] << 2) | codes[:, :, 3]


def pack_kmer(kmer: str | bytes, k: int) -> bytes:
    if isinstance(kmer, str):
        kmer = kmer.encode("ascii")
    if len(kmer) != k or not re.fullmatch(rb"[ACGT]+", kmer):
        raise DatasetError(f"invalid {k}-mer {kmer!r}")
    arr = np.frombuffer(kmer, dtype=np.uint8).reshape(1, k)
    return pack_kmers(arr, k)[0].tobytes()


def load_kmer_table(path: Union[str, Path], k: int) -> KeyValueDataset:
    """Read ``kmer<TAB>count`` lines into a dataset of packed k-mer keys."""
    if k < 1:
        raise DatasetError("k must be >= 1")
    base = re.compile(rb"[ACGT]{%d}" % k)
    kmers = bytearray()
    counts = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip(b"\r\n")
            if not line:
                continue
            m = _KMER_LINE.fullmatch(line)
            if m is None:
                raise KmerTableError(lineno, "expected 'kmer<TAB>count'")
            kmer, count = m.groups()
            if len(kmer) != k:
                raise KmerTableError(lineno, f"k-mer has length {len(kmer)}, expected {k}")
            if not base.fullmatch(kmer):
                raise KmerTableError(lineno, f"non-ACGT character in {kmer.decode(errors='replace')!r}")
            if not count.isdigit() or int(count) < 1:
                raise KmerTableError(lineno, f"count must be a positive integer, got {count.decode(errors='replace')!r}")
            kmers += kmer
            counts.append(int(count))
    if not counts:
        raise DatasetError(f"{path}: no k-mers found")
    arr = np.frombuffer(bytes(kmers), dtype=np.uint8).reshape(-1, k)
    keys = pack_kmers(arr, k)
    ds = KeyValueDataset(keys, np.array(counts, dtype=np.uint64), check=False)
    if not ds._distinct():
        raise DatasetError(f"{path}: duplicate k-mers")
    return ds


def load_tsv(path: Union[str, Path]) -> KeyValueDataset:
    """Generic ``key<TAB>value`` file; keys are taken as raw UTF-8 bytes."""
    keys = []
    values = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip(b"\r\n")
            if not line:
                continue
            m = _KMER_LINE.fullmatch(line)
            if m is None or not m.group(2).isdigit():
                raise DatasetError(f"line {lineno}: expected 'key<TAB>unsigned value'")
            value = int(m.group(2))
            if value >= 1 << 64:
                raise DatasetError(f"line {lineno}: value exceeds 64 bits")
            keys.append(m.group(1))
            values.append(value)
    if not keys:
        raise DatasetError(f"{path}: empty table")
    if len(set(keys)) != len(keys):
        raise DatasetError(f"{path}: duplicate keys")
    return KeyValueDataset(keys, values, check=False)
