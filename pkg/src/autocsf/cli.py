"""Command-line entry point: sweeps, benchmarks and the index lifecycle."""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from typing import Optional, Sequence

from . import bench, linsys
from .auto import build_auto, load_index, save_index
from .csf import DecodeError, FormatError
from .dataset import DatasetError, load_kmer_table, load_tsv, pack_kmer, parse_distribution
from .filters import enumerate_specs


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _open_out(path: Optional[str]):
    return open(path, "w", newline="") if path else contextlib.nullcontext(sys.stdout)


def _mode(arity: int) -> linsys.DeltaMode:
    return linsys.delta_mode(arity)


def _check_families(fams: Sequence[str]) -> None:
    if not fams:
        raise ValueError("empty filter family list")
    enumerate_specs(fams)


def cmd_sweep_alpha(args) -> int:
    _check_families(args.families)
    for d in args.dist:
        parse_distribution(d)
    rows = bench.sweep_alpha(args.dist, args.alphas, args.families, args.n, args.seeds, args.seed,
                             _mode(args.hashes), args.jobs)
    with _open_out(args.out) as fh:
        bench.write_csv(rows, bench.SWEEP_COLUMNS, fh)
    for c in bench.lb_crossings(rows):
        print(f"lb-crossing {c['distribution']}/{c['family']}: lb>0 from alpha={c['lb_crossing_alpha']}, "
              f"measured>0 from alpha={c['savings_onset_alpha']}", file=sys.stderr)
    return 0


def cmd_sweep_epsilon(args) -> int:
    _check_families(args.families)
    rows = []
    for d in args.dist:
        for a in args.alphas:
            rows += bench.sweep_epsilon(d, a, args.families, args.n, args.seeds, args.seed, _mode(args.hashes))
    with _open_out(args.out) as fh:
        bench.write_csv(rows, bench.SWEEP_COLUMNS, fh)
    return 0


def cmd_bench(args) -> int:
    kw = dict(methods=args.methods, n_probes=args.probes, runs=args.runs, seed=args.seed,
              mode=_mode(args.hashes))
    if args.kmer_table:
        ds = load_kmer_table(args.kmer_table, args.k)
        rows = bench.bench_dataset(ds, args.kmer_table, **kw)
    else:
        rows = bench.synthetic_bench(args.dist, args.alphas, args.n, **kw)
    with _open_out(args.out) as fh:
        bench.write_csv(rows, bench.BENCH_COLUMNS, fh, header_note=bench.hardware_note())
    return 0


def cmd_build(args) -> int:
    ds = load_kmer_table(args.input, args.k) if args.k else load_tsv(args.input)
    specs = enumerate_specs(args.families)
    idx, report = build_auto(ds, _mode(args.hashes), specs, seed=args.seed)
    values, ok = idx.query_hashes(ds.hashes(0))
    if not (ok.all() and (values == ds.values).all()):
        raise RuntimeError("built index failed its exactness check")
    save_index(idx, args.out)
    info = report.to_dict()
    info.update(n_keys=ds.N, size_bits=idx.size_bits, bpk=idx.bpk)
    print(json.dumps(info, indent=2), file=sys.stderr)
    return 0


def cmd_query(args) -> int:
    idx = load_index(args.index)
    out = sys.stdout
    for raw in sys.stdin:
        key = raw.rstrip("\r\n")
        if not key:
            continue
        try:
            kb = pack_kmer(key, args.k) if args.k else key.encode("utf-8")
            out.write(f"{key}\t{idx.query(kb)}\n")
        except (DecodeError, DatasetError):
            out.write(f"{key}\tNOT_DECODABLE\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="autocsf", description="Compressed static functions with automatic pre-filtering.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dists=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n", type=int, default=100_000, help="keys per synthetic dataset")
        sp.add_argument("--out", help="CSV output path (default stdout)")
        sp.add_argument("--hashes", type=int, choices=(3, 4), default=3, help="hashes per CSF equation")
        if dists:
            sp.add_argument("--dist", type=_names, default=list(bench.DEFAULT_DISTS),
                            help="comma list of uniform, zipfian, unique")

    sa = sub.add_parser("sweep-alpha", help="bounds vs measured savings over a grid of alpha")
    common(sa)
    sa.add_argument("--alphas", type=_floats, default=list(bench.DEFAULT_ALPHAS))
    sa.add_argument("--families", type=_names, default=list(bench.DEFAULT_FAMILIES),
                    help="comma list of bloom, bloom-kN, xor, fuse")
    sa.add_argument("--seeds", type=int, default=3, help="datasets averaged per grid point")
    sa.add_argument("--jobs", type=int, default=1)
    sa.set_defaults(func=cmd_sweep_alpha)

    se = sub.add_parser("sweep-epsilon", help="every discrete filter configuration at fixed alpha")
    common(se)
    se.add_argument("--alphas", type=_floats, default=[0.7, 0.9])
    se.add_argument("--families", type=_names, default=list(bench.DEFAULT_FAMILIES))
    se.add_argument("--seeds", type=int, default=3)
    se.set_defaults(func=cmd_sweep_epsilon)

    bn = sub.add_parser("bench", help="size, query latency and build time per method")
    common(bn)
    bn.add_argument("--alphas", type=_floats, default=[0.5, 0.8, 0.95])
    bn.add_argument("--kmer-table", help="TSV kmer<TAB>count file instead of synthetic data")
    bn.add_argument("--k", type=int, default=15)
    bn.add_argument("--methods", type=_names, default=["AutoCSF", "BCSF", "PlainCSF", "HashMap"])
    bn.add_argument("--probes", type=int, default=1_000_000)
    bn.add_argument("--runs", type=int, default=5)
    bn.set_defaults(func=cmd_bench)

    bd = sub.add_parser("build", help="build an index file from a TSV")
    bd.add_argument("input", help="key<TAB>value TSV, or kmer<TAB>count with --k")
    bd.add_argument("--out", required=True, help="index file to write (.csf)")
    bd.add_argument("--k", type=int, default=0, help="treat keys as k-mers of this length")
    bd.add_argument("--families", type=_names, default=list(bench.DEFAULT_FAMILIES))
    bd.add_argument("--seed", type=int, default=0)
    bd.add_argument("--hashes", type=int, choices=(3, 4), default=3)
    bd.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="answer keys read from stdin, one per line")
    q.add_argument("index")
    q.add_argument("--k", type=int, default=0, help="keys are k-mers of this length")
    q.set_defaults(func=cmd_query)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"autocsf: index format error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"autocsf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
