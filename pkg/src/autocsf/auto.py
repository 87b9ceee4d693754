"""Filter-or-not decision for CSFs, and the filtered composite index.

For a dataset with majority fraction ``alpha``, vocabulary ``n`` over ``N``
keys and a filter with false-positive rate ``eps`` costing ``b`` bits per
stored key, the per-key saving of putting the filter in front of the CSF
is bracketed by

    LB = alpha*delta*(1 - eps) - (1 - alpha)*b - n/N
    UB = 2*delta - alpha*delta*eps/2 + n/N - (1 - alpha)*b

Filtering is chosen exactly when the best discrete configuration has a
positive lower bound, so a filter is never recommended unless it is
guaranteed to save space.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import linsys
from .csf import (KEY_HASH_SEED, CsfIndex, DecodeError, FormatError, build_csf_hashed,
                  planned_size_bits)
from .dataset import KeyValueDataset, ValueHistogram
from .filters import (BuiltFilter, FilterFamily, FilterSpec, build_filter_hashed,
                      enumerate_specs, FUSE_FACTOR, XOR_FACTOR)
from .hashing import derive_seed, hash_keys

DeltaLike = Union[linsys.DeltaMode, float]

_FILTER_TAG = 0xF117
_FILTERED_HEADER = struct.Struct("<4sHxxQQQQQQ")
_FILTERED_MAGIC = b"FCSF"
_CONTAINER = struct.Struct("<4sHB")
_CONTAINER_MAGIC = b"AIDX"
FORMAT_VERSION = 1
PLAIN, FILTERED = 0, 1


def _delta_value(delta: DeltaLike) -> float:
    return delta.value if isinstance(delta, linsys.DeltaMode) else float(delta)


def lower_bound(alpha: float, delta: DeltaLike, spec: FilterSpec, n_over_N: float) -> float:
    """Guaranteed bits/key saved by filtering with ``spec``."""
    d = _delta_value(delta)
    return alpha * d * (1.0 - spec.eps) - (1.0 - alpha) * spec.bpk - n_over_N


def upper_bound(alpha: float, delta: DeltaLike, spec: FilterSpec, n_over_N: float) -> float:
    """Ceiling on bits/key saved by filtering with ``spec``."""
    d = _delta_value(delta)
    return 2.0 * d - 0.5 * alpha * d * spec.eps + n_over_N - spec.bpk * (1.0 - alpha)


@dataclass(frozen=True)
class BoundRow:
    spec: FilterSpec
    lb: float
    ub: float


@dataclass(frozen=True)
class BoundReport:
    alpha: float
    n_over_N: float
    delta: float
    rows: tuple
    best: BoundRow
    # informational continuous optimum per family label, never used for decisions
    continuous_eps: dict = field(default_factory=dict)

    @property
    def best_spec(self) -> FilterSpec:
        return self.best.spec

    @property
    def lb_star(self) -> float:
        return self.best.lb

    @property
    def ub_star(self) -> float:
        return self.best.ub

    @property
    def use_filter(self) -> bool:
        return self.best.lb > 0

    @property
    def decision(self) -> str:
        return f"Filter({self.best.spec.label})" if self.use_filter else "NoFilter"

    def to_dict(self, include_rows: bool = False) -> dict:
        out = {
            "alpha": self.alpha,
            "n_over_N": self.n_over_N,
            "delta": self.delta,
            "decision": self.decision,
            "best_spec": self.best.spec.label,
            "best_eps": self.best.spec.eps,
            "best_bpk": self.best.spec.bpk,
            "lb_star": self.lb_star,
            "ub_star": self.ub_star,
            "continuous_eps": self.continuous_eps,
        }
        if include_rows:
            out["rows"] = [{"spec": r.spec.label, "eps": r.spec.eps, "bpk": r.spec.bpk,
                            "lb": r.lb, "ub": r.ub} for r in self.rows]
        return out

    def to_json(self, include_rows: bool = False) -> str:
        return json.dumps(self.to_dict(include_rows), indent=2)


def _rank_key(row: BoundRow):
    return (-row.lb, row.spec.bpk, int(row.spec.family))


def continuous_optimum(alpha: float, delta: float, n_over_N: float, family: FilterFamily,
                       k: int = 1, arity: int = 3) -> float:
    """``eps`` maximising the lower bound when the family's parameter is continuous."""
    if alpha <= 0:
        return 1.0
    if family is FilterFamily.BLOOM:
        def neg(bpe):
            return -(alpha * delta * (1 - (1 - math.exp(-k / bpe)) ** k) - (1 - alpha) * bpe)
        # the objective is not unimodal in bpe, so bracket on a coarse grid first
        grid = np.geomspace(0.05, 128.0, 400)
        i = int(np.argmin([neg(b) for b in grid]))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded")
        return (1 - math.exp(-k / res.x)) ** k
    c = XOR_FACTOR if family is FilterFamily.XOR else FUSE_FACTOR[arity]
    # d/df [a d (1 - 2^-f) - (1-a) c f] = 0
    return min(1.0, (1 - alpha) * c / (alpha * delta * math.log(2)))


def decide(h: ValueHistogram, delta: DeltaLike = linsys.DELTA3,
           specs: Optional[Sequence[FilterSpec]] = None) -> BoundReport:
    """Evaluate both bounds at every discrete spec and pick the best lower bound.

    Ties go to the smaller filter, then to Bloom before Xor before fuse.
    """
    if specs is None:
        specs = enumerate_specs()
    specs = list(specs)
    if not specs:
        raise ValueError("decide needs at least one filter spec")
    d = _delta_value(delta)
    alpha = h.alpha
    n_over_N = h.n / h.N
    rows = tuple(BoundRow(s, lower_bound(alpha, d, s, n_over_N), upper_bound(alpha, d, s, n_over_N))
                 for s in specs)
    best = min(rows, key=_rank_key)
    cont = {}
    for s in specs:
        label = s.family.label if s.family is not FilterFamily.BLOOM else f"bloom-k{s.k}"
        if label not in cont:
            cont[label] = continuous_optimum(alpha, d, n_over_N, s.family, s.k, s.arity)
    return BoundReport(alpha=alpha, n_over_N=n_over_N, delta=d, rows=rows, best=best,
                       continuous_eps=cont)


# composite index


class FilteredCsfIndex:
    """A filter over the minority keys in front of a CSF.

    Filter-negative keys answer the majority value; the CSF holds the
    minority keys plus the majority keys the filter wrongly accepts.
    """

    def __init__(self, majority_value: int, filt: BuiltFilter, csf: Optional[CsfIndex],
                 n_keys: int, f0: int, fp_count: int):
        self.majority_value = int(majority_value)
        self.filter = filt
        self.csf = csf
        self.n_keys = int(n_keys)
        self.f0 = int(f0)
        self.fp_count = int(fp_count)

    @property
    def fp_fraction(self) -> float:
        return self.fp_count / self.f0 if self.f0 else 0.0

    def query_hashes(self, hashes: np.ndarray):
        hashes = np.ascontiguousarray(hashes, dtype=np.uint64)
        hit = self.filter.contains_hashes(hashes)
        values = np.full(hashes.shape[0], self.majority_value, dtype=np.uint64)
        ok = np.ones(hashes.shape[0], dtype=bool)
        if hit.any():
            idx = np.flatnonzero(hit)
            if self.csf is None:
                ok[idx] = False
            else:
                v, good = self.csf.query_hashes(hashes[idx])
                values[idx] = v
                ok[idx] = good
        return values, ok

    def query_many(self, keys):
        return self.query_hashes(hash_keys(keys, KEY_HASH_SEED))

    def query(self, key: bytes) -> int:
        values, ok = self.query_many([bytes(key)])
        if not ok[0]:
            raise DecodeError("key does not decode; it was not in the build set")
        return int(values[0])

    def to_bytes(self) -> bytes:
        fb = self.filter.to_bytes()
        cb = self.csf.to_bytes() if self.csf is not None else b""
        head = _FILTERED_HEADER.pack(_FILTERED_MAGIC, FORMAT_VERSION, self.majority_value, self.n_keys,
                                     self.f0, self.fp_count, len(fb), len(cb))
        return head + fb + cb

    @classmethod
    def from_bytes(cls, data: bytes) -> "FilteredCsfIndex":
        if len(data) < _FILTERED_HEADER.size:
            raise FormatError("truncated filtered-index header")
        magic, version, v0, n_keys, f0, fp, flen, clen = _FILTERED_HEADER.unpack_from(data)
        if magic != _FILTERED_MAGIC:
            raise FormatError("not a filtered index (bad magic)")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported filtered-index version {version}")
        off = _FILTERED_HEADER.size
        if len(data) != off + flen + clen:
            raise FormatError("filtered index payload has the wrong length")
        filt = BuiltFilter.from_bytes(data[off:off + flen])
        csf = CsfIndex.from_bytes(data[off + flen:]) if clen else None
        return cls(v0, filt, csf, n_keys, f0, fp)

    @property
    def size_bits(self) -> int:
        csf_bits = self.csf.size_bits if self.csf is not None else 0
        return 8 * _FILTERED_HEADER.size + self.filter.size_bits + csf_bits

    @property
    def bpk(self) -> float:
        return self.size_bits / self.n_keys

    def size_report(self) -> dict:
        csf_bits = self.csf.size_bits if self.csf is not None else 0
        return {
            "filter_bits": self.filter.size_bits,
            "csf_bits": csf_bits,
            "metadata_bits": 8 * _FILTERED_HEADER.size,
            "size_bits": self.size_bits,
            "bpk": self.bpk,
            "fp_count": self.fp_count,
        }


AnyIndex = Union[CsfIndex, FilteredCsfIndex]


def filter_seed(seed: int) -> int:
    return int(derive_seed(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(_FILTER_TAG)))


def _split(ds: KeyValueDataset, h: ValueHistogram):
    hashes = ds.hashes(KEY_HASH_SEED)
    v0 = h.majority_value
    minority = ds.values != np.uint64(v0)
    return hashes, v0, minority


def build_filtered(ds: KeyValueDataset, spec: FilterSpec, mode: linsys.DeltaMode = linsys.DELTA3,
                   seed: int = 0, h: Optional[ValueHistogram] = None,
                   value_bits: Union[int, str] = "auto") -> FilteredCsfIndex:
    """Filter the minority keys and build the CSF over what gets through."""
    h = h or ds.histogram()
    hashes, v0, minority = _split(ds, h)
    filt = build_filter_hashed(spec, hashes[minority], filter_seed(seed))
    major_idx = np.flatnonzero(~minority)
    fp = filt.contains_hashes(hashes[major_idx])
    keep = minority.copy()
    keep[major_idx[fp]] = True
    csf = None
    if keep.any():
        csf = build_csf_hashed(hashes[keep], ds.values[keep], mode, seed, value_bits)
    return FilteredCsfIndex(v0, filt, csf, ds.N, major_idx.size, int(fp.sum()))


def build_plain(ds: KeyValueDataset, mode: linsys.DeltaMode = linsys.DELTA3, seed: int = 0,
                value_bits: Union[int, str] = "auto") -> CsfIndex:
    return build_csf_hashed(ds.hashes(KEY_HASH_SEED), ds.values, mode, seed, value_bits)


def build_auto(ds: KeyValueDataset, mode: linsys.DeltaMode = linsys.DELTA3,
               specs: Optional[Sequence[FilterSpec]] = None, seed: int = 0,
               value_bits: Union[int, str] = "auto"):
    """Decide, then build.  Returns ``(index, report)``."""
    h = ds.histogram()
    report = decide(h, mode, specs)
    if report.use_filter:
        return build_filtered(ds, report.best_spec, mode, seed, h, value_bits), report
    return build_plain(ds, mode, seed, value_bits), report


def query_auto(idx: AnyIndex, key: bytes) -> int:
    return idx.query(key)


# measurement


@dataclass(frozen=True)
class SavingsMeasurement:
    spec: FilterSpec
    plain_bits: int
    filtered_bits: int
    filter_bits: int
    fp_count: int
    f0: int
    N: int

    @property
    def savings_bpk(self) -> float:
        return (self.plain_bits - self.filtered_bits) / self.N

    @property
    def plain_bpk(self) -> float:
        return self.plain_bits / self.N

    @property
    def filtered_bpk(self) -> float:
        return self.filtered_bits / self.N


def measure(ds: KeyValueDataset, spec: FilterSpec, mode: linsys.DeltaMode = linsys.DELTA3,
            seed: int = 0, materialize: bool = False, plain_bits: Optional[int] = None,
            value_bits: Union[int, str] = "auto") -> SavingsMeasurement:
    """Size of the plain and the filtered index on identical data and seed.

    The filter is always built (its false positives decide the CSF build
    set).  With ``materialize=False`` the CSFs are laid out but not solved;
    their serialized size is a pure function of the layout, so the numbers
    are identical to a full build.
    """
    h = ds.histogram()
    if materialize:
        plain_bits = build_plain(ds, mode, seed, value_bits).size_bits
        idx = build_filtered(ds, spec, mode, seed, h, value_bits)
        return SavingsMeasurement(spec, plain_bits, idx.size_bits, idx.filter.size_bits,
                                  idx.fp_count, idx.f0, ds.N)
    hashes, v0, minority = _split(ds, h)
    if plain_bits is None:
        plain_bits = planned_size_bits(hashes, ds.values, mode, seed, value_bits)
    filt = build_filter_hashed(spec, hashes[minority], filter_seed(seed))
    major_idx = np.flatnonzero(~minority)
    fp = filt.contains_hashes(hashes[major_idx])
    keep = minority.copy()
    keep[major_idx[fp]] = True
    csf_bits = planned_size_bits(hashes[keep], ds.values[keep], mode, seed, value_bits) if keep.any() else 0
    filtered_bits = 8 * _FILTERED_HEADER.size + filt.size_bits + csf_bits
    return SavingsMeasurement(spec, int(plain_bits), int(filtered_bits), filt.size_bits,
                              int(fp.sum()), int(major_idx.size), ds.N)


def measured_savings(ds: KeyValueDataset, spec: FilterSpec, mode: linsys.DeltaMode = linsys.DELTA3,
                     seed: int = 0, materialize: bool = False) -> float:
    """``(plain bits - filtered bits) / N`` for ``spec`` on ``ds``."""
    return measure(ds, spec, mode, seed, materialize).savings_bpk


# container files


def index_to_bytes(idx: AnyIndex) -> bytes:
    variant = FILTERED if isinstance(idx, FilteredCsfIndex) else PLAIN
    return _CONTAINER.pack(_CONTAINER_MAGIC, FORMAT_VERSION, variant) + idx.to_bytes()


def index_from_bytes(data: bytes) -> AnyIndex:
    if len(data) < _CONTAINER.size:
        raise FormatError("truncated index container")
    magic, version, variant = _CONTAINER.unpack_from(data)
    if magic != _CONTAINER_MAGIC:
        raise FormatError("not an index container (bad magic)")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported index container version {version}")
    body = data[_CONTAINER.size:]
    if variant == PLAIN:
        return CsfIndex.from_bytes(body)
    if variant == FILTERED:
        return FilteredCsfIndex.from_bytes(body)
    raise FormatError(f"unknown index variant {variant}")


def save_index(idx: AnyIndex, path: Union[str, Path]) -> None:
    Path(path).write_bytes(index_to_bytes(idx))


def load_index(path: Union[str, Path]) -> AnyIndex:
    return index_from_bytes(Path(path).read_bytes())
