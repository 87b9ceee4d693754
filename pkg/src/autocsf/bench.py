"""Sweeps and benchmarks that produce the CSV tables behind the experiments.

``sweep_alpha`` and ``sweep_epsilon`` compare the predicted bounds with
measured savings; ``bench`` times builds and queries for every method.
"""

from __future__ import annotations

import csv
import io
import math
import os
import platform
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from . import linsys
from .auto import build_auto, build_plain, decide, measure
from .bcsf import build_bcsf
from .csf import KEY_HASH_SEED, planned_size_bits
from .dataset import KeyValueDataset, gen_synthetic, parse_distribution
from .filters import FilterSpec, enumerate_specs

DEFAULT_ALPHAS = tuple(round(0.50 + 0.01 * i, 2) for i in range(50))
DEFAULT_DISTS = ("uniform", "zipfian", "unique")
DEFAULT_FAMILIES = ("bloom", "xor", "fuse")


@dataclass
class SweepRow:
    distribution: str
    alpha: float
    family: str
    spec: str
    eps: float
    model_bpk: float
    lb: float
    ub: float
    measured_savings_bpk: float
    plain_bpk: float
    filtered_bpk: float
    fp_fraction: float
    decision: str
    is_best: int
    seeds_averaged: int


SWEEP_COLUMNS = [f.name for f in fields(SweepRow)]


@dataclass
class BenchRow:
    method: str
    dataset: str
    n_keys: int
    bpk: float
    query_ns: float
    query_ns_median: float
    build_s: float
    note: str = ""


BENCH_COLUMNS = [f.name for f in fields(BenchRow)]


def _rank_key(lb: float, spec: FilterSpec):
    return (-lb, spec.bpk, int(spec.family))


def sweep_cell(dist_name: str, alpha: float, family_tokens: Sequence[str], N: int, seeds: int,
               seed: int = 0, mode: linsys.DeltaMode = linsys.DELTA3) -> list[SweepRow]:
    """All rows for one ``(distribution, alpha)`` grid point.

    Each family token is treated as its own candidate set: the best spec
    and the decision are computed within the family.
    """
    dist = parse_distribution(dist_name)
    groups = [(tok, enumerate_specs([tok])) for tok in family_tokens]
    all_specs = [s for _, specs in groups for s in specs]
    if not all_specs:
        raise ValueError("no filter specs selected")
    acc = {s: np.zeros(6) for s in all_specs}
    for r in range(seeds):
        ds = gen_synthetic(N, alpha, dist, seed + r)
        h = ds.histogram()
        report = decide(h, mode, all_specs)
        plain = planned_size_bits(ds.hashes(KEY_HASH_SEED), ds.values, mode, seed + r)
        for row in report.rows:
            m = measure(ds, row.spec, mode, seed + r, plain_bits=plain)
            acc[row.spec] += (row.lb, row.ub, m.savings_bpk, m.plain_bpk, m.filtered_bpk,
                              m.fp_count / m.f0 if m.f0 else 0.0)
    out = []
    for tok, specs in groups:
        means = {s: acc[s] / seeds for s in specs}
        best = min(specs, key=lambda s: _rank_key(means[s][0], s))
        decision = "Filter" if means[best][0] > 0 else "NoFilter"
        for s in specs:
            lb, ub, sav, pb, fb, fpf = means[s]
            out.append(SweepRow(dist_name, alpha, tok, s.label, s.eps, s.bpk, lb, ub, sav, pb, fb,
                                fpf, decision, int(s == best), seeds))
    return out


def _cell_args(args):
    return sweep_cell(*args)


def sweep_alpha(dists: Sequence[str] = DEFAULT_DISTS, alphas: Sequence[float] = DEFAULT_ALPHAS,
                families: Sequence[str] = DEFAULT_FAMILIES, N: int = 100_000, seeds: int = 3,
                seed: int = 0, mode: linsys.DeltaMode = linsys.DELTA3, jobs: int = 1) -> list[SweepRow]:
    """Measure every spec of every family at every ``(distribution, alpha)``."""
    cells = [(d, float(a), tuple(families), N, seeds, seed, mode) for d in dists for a in alphas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_cell_args, cells))
    else:
        parts = [_cell_args(c) for c in cells]
    return [row for part in parts for row in part]


def sweep_epsilon(dist: str, alpha: float, families: Sequence[str] = DEFAULT_FAMILIES,
                  N: int = 100_000, seeds: int = 3, seed: int = 0,
                  mode: linsys.DeltaMode = linsys.DELTA3) -> list[SweepRow]:
    """Every discrete configuration at one ``alpha``."""
    if not families:
        raise ValueError("no filter specs selected")
    return sweep_cell(dist, float(alpha), tuple(families), N, seeds, seed, mode)


def lb_crossings(rows: Iterable[SweepRow]) -> list[dict]:
    """Smallest alpha where the best lower bound, and the best measured saving, turn positive."""
    best = {}
    for r in rows:
        key = (r.distribution, r.family)
        cell = best.setdefault(key, {})
        lb_prev, sav_prev = cell.get(r.alpha, (-math.inf, -math.inf))
        cell[r.alpha] = (max(lb_prev, r.lb), max(sav_prev, r.measured_savings_bpk))
    out = []
    for (dist, fam), cell in best.items():
        alphas = sorted(cell)
        lb_a = next((a for a in alphas if cell[a][0] > 0), None)
        sav_a = next((a for a in alphas if cell[a][1] > 0), None)
        out.append({"distribution": dist, "family": fam, "lb_crossing_alpha": lb_a,
                    "savings_onset_alpha": sav_a})
    return out


# benchmarks


def hardware_note() -> str:
    return (f"python {platform.python_version()} on {platform.machine()} "
            f"{platform.processor() or 'cpu'} x{os.cpu_count()} ({platform.system()})")


def _dict_footprint_bits(table: dict) -> int:
    """Rough resident size of a dict of bytes -> int (container plus objects)."""
    total = sys.getsizeof(table)
    for k, v in table.items():
        total += sys.getsizeof(k) + sys.getsizeof(v)
    return 8 * total


def _time_runs(fn, runs: int, n_probes: int):
    per = []
    for _ in range(runs):
        t = time.perf_counter()
        fn()
        per.append((time.perf_counter() - t) * 1e9 / n_probes)
    return statistics.fmean(per), statistics.median(per)


def _probe_sample(ds: KeyValueDataset, n_probes: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, ds.N, size=n_probes)


def _key_subset(ds: KeyValueDataset, idx: np.ndarray):
    if isinstance(ds.keys, np.ndarray):
        return ds.keys[idx]
    return [ds.keys[i] for i in idx]


def bench_dataset(ds: KeyValueDataset, name: str, methods: Sequence[str] = ("AutoCSF", "BCSF", "PlainCSF", "HashMap"),
                  n_probes: int = 1_000_000, runs: int = 5, seed: int = 0,
                  mode: linsys.DeltaMode = linsys.DELTA3) -> list[BenchRow]:
    """Build each method, check every probe answers exactly, then time queries."""
    probe_idx = _probe_sample(ds, n_probes, seed)
    probe_keys = _key_subset(ds, probe_idx)
    expected = ds.values[probe_idx]
    rows = []
    for method in methods:
        t = time.perf_counter()
        note = ""
        if method == "AutoCSF":
            idx, report = build_auto(ds, mode, seed=seed)
            note = report.decision
        elif method == "BCSF":
            idx, dec = build_bcsf(ds, seed, mode)
            note = f"bloom(eps*={dec.eps_star:.4g})" if dec.use_filter else "NoFilter"
        elif method == "PlainCSF":
            idx = build_plain(ds, mode, seed)
        elif method == "HashMap":
            table = {ds.key(i): int(ds.values[i]) for i in range(ds.N)}
        else:
            raise ValueError(f"unknown method {method!r}")
        build_s = time.perf_counter() - t

        if method == "HashMap":
            keys_b = [bytes(k) for k in probe_keys] if isinstance(probe_keys, np.ndarray) else probe_keys
            got = np.fromiter((table[k] for k in keys_b), dtype=np.uint64, count=len(keys_b))
            if not np.array_equal(got, expected):
                raise AssertionError("HashMap returned a wrong value")

            def run():
                for k in keys_b:
                    table[k]

            bits = _dict_footprint_bits(table)
            note = "size is an estimate of resident dict + key/value objects"
        else:
            got, ok = idx.query_many(probe_keys)
            if not (ok.all() and np.array_equal(got, expected)):
                raise AssertionError(f"{method} returned a wrong value")

            def run():
                idx.query_many(probe_keys)

            bits = idx.size_bits
        mean_ns, median_ns = _time_runs(run, runs, n_probes)
        rows.append(BenchRow(method, name, ds.N, bits / ds.N, mean_ns, median_ns, build_s, note))
    return rows


def synthetic_bench(dists: Sequence[str] = DEFAULT_DISTS, alphas: Sequence[float] = (0.5, 0.8, 0.95),
                    N: int = 100_000, **kw) -> list[BenchRow]:
    rows = []
    for d in dists:
        for a in alphas:
            ds = gen_synthetic(N, a, parse_distribution(d), kw.get("seed", 0))
            rows += bench_dataset(ds, f"{d}/alpha={a:g}/N={N}", **kw)
    return rows


# CSV


def write_csv(rows: Sequence, columns: Sequence[str], out=None, header_note: Optional[str] = None) -> str:
    buf = io.StringIO()
    if header_note:
        buf.write(f"# {header_note}\n")
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = asdict(r)
        w.writerow({c: (f"{d[c]:.6g}" if isinstance(d[c], float) else d[c]) for c in columns})
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def read_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
