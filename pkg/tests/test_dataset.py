import math

import numpy as np
import pytest

from autocsf.dataset import (DatasetError, KeyValueDataset, KmerTableError, Uniform, Unique,
                             ValueHistogram, Zipf, gen_synthetic, histogram, load_kmer_table,
                             pack_kmer, zipf_ranks)


def ds_from_values(values):
    return KeyValueDataset([i.to_bytes(4, "little") for i in range(len(values))], values)


def test_histogram_small_example():
    h = histogram(ds_from_values([7, 7, 7, 9]))
    assert h.entries == [(7, 3), (9, 1)]
    assert h.alpha == 0.75 and h.n == 2
    assert h.h0 == pytest.approx(-(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25)))
    assert h.h0 == pytest.approx(0.811, abs=1e-3)


def test_histogram_single_and_uniform():
    h = histogram(ds_from_values([5]))
    assert h.entries == [(5, 1)] and h.alpha == 1.0 and h.n == 1 and h.h0 == 0.0
    h = histogram(ds_from_values([1, 2, 3, 4]))
    assert h.alpha == 0.25 and h.n == 4 and h.h0 == pytest.approx(2.0)


def test_histogram_ties_by_ascending_value():
    h = histogram(ds_from_values([9, 3, 9, 3, 1]))
    assert h.entries == [(3, 2), (9, 2), (1, 1)]
    assert h.majority_value == 3


def test_histogram_permutation_invariant():
    ds = gen_synthetic(5000, 0.6, Zipf(1.5), seed=2)
    perm = np.random.default_rng(0).permutation(ds.N)
    other = KeyValueDataset(ds.keys[perm], ds.values[perm])
    a, b = ds.histogram(), other.histogram()
    assert np.array_equal(a.values, b.values) and np.array_equal(a.freqs, b.freqs)


def test_dataset_validation():
    with pytest.raises(DatasetError):
        KeyValueDataset([b"a", b"a"], [1, 2])
    with pytest.raises(DatasetError):
        KeyValueDataset([b"a"], [1, 2])
    with pytest.raises(DatasetError):
        KeyValueDataset([], [])


def test_gen_synthetic_uniform_counts():
    ds = gen_synthetic(100_000, 0.8, Uniform(100), seed=11)
    h = ds.histogram()
    assert h.freqs[0] == 80_000 and h.majority_value == 0
    assert h.n - 1 <= 100
    assert h.alpha == 80_000 / 100_000


def test_gen_synthetic_unique_small():
    ds = gen_synthetic(10, 0.5, Unique(), seed=1)
    vals = ds.values
    assert (vals == 0).sum() == 5
    minority = vals[vals != 0]
    assert minority.size == 5 and np.unique(minority).size == 5


@pytest.mark.parametrize("alpha", [0.0, 0.33, 0.5, 0.77, 0.99, 1.0])
def test_gen_synthetic_alpha_exact(alpha):
    N = 1234
    ds = gen_synthetic(N, alpha, Uniform(100), seed=5)
    assert (ds.values == 0).sum() == math.floor(alpha * N)


def test_gen_synthetic_is_pure():
    a = gen_synthetic(3000, 0.7, Zipf(1.5), seed=9)
    b = gen_synthetic(3000, 0.7, Zipf(1.5), seed=9)
    assert np.array_equal(a.keys, b.keys) and np.array_equal(a.values, b.values)
    c = gen_synthetic(3000, 0.7, Zipf(1.5), seed=10)
    assert not np.array_equal(a.values, c.values)


def test_gen_synthetic_keys_distinct_and_shuffled():
    ds = gen_synthetic(50_000, 0.9, Unique(), seed=4)
    assert ds._distinct()
    # majority keys spread through the order, not a prefix block
    first = ds.values[:5000]
    assert 0.85 < (first == 0).mean() < 0.95


def test_minority_law_validation():
    with pytest.raises(DatasetError):
        Zipf(0)
    with pytest.raises(DatasetError):
        Zipf(-1.0)
    with pytest.raises(DatasetError):
        Uniform(0)


def test_zipf_top_ranks_match_power_law():
    rng = np.random.default_rng(123)
    ranks = zipf_ranks(1_000_000, 1.5, rng)
    norm = np.sum(np.arange(1, 1_000_001, dtype=float) ** -1.5)
    counts = np.bincount(ranks.astype(np.int64), minlength=6)
    for r in range(1, 6):
        expected = r ** -1.5 / norm
        assert counts[r] / 1e6 == pytest.approx(expected, rel=0.02)
    # chi-square over ranks 1..5 plus the tail bucket
    p = np.array([r ** -1.5 / norm for r in range(1, 6)])
    obs = np.append(counts[1:6], 1_000_000 - counts[1:6].sum())
    exp = np.append(p, 1 - p.sum()) * 1e6
    chi2 = np.sum((obs - exp) ** 2 / exp)
    assert chi2 < 20.5  # 99.9% quantile of chi-square with 5 dof


def test_kmer_table_small(tmp_path):
    f = tmp_path / "t.tsv"
    f.write_text("ACGT\t3\nTTTT\t1\n")
    ds = load_kmer_table(f, 4)
    assert ds.N == 2
    assert sorted(ds.histogram().entries) == [(1, 1), (3, 1)]
    assert ds.key(0) == bytes([0b00011011])
    assert ds.key(1) == bytes([0xFF])


def test_kmer_packing_big_endian():
    # 5-mer needs 10 bits -> 2 bytes, first base in the high bits
    assert pack_kmer("TAAAA", 5) == (3 << 8).to_bytes(2, "big")
    assert pack_kmer("AAAAC", 5) == (1).to_bytes(2, "big")


@pytest.mark.parametrize("text, line", [
    ("ACGX\t2\n", 1),
    ("ACGT\t2\nACG\t1\n", 2),
    ("ACGT 2\n", 1),
    ("ACGT\t0\n", 1),
    ("ACGT\tx\n", 1),
])
def test_kmer_table_errors(tmp_path, text, line):
    f = tmp_path / "bad.tsv"
    f.write_text(text)
    with pytest.raises(KmerTableError) as err:
        load_kmer_table(f, 4)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_kmer_table_duplicates(tmp_path):
    f = tmp_path / "dup.tsv"
    f.write_text("ACGT\t2\nACGT\t5\n")
    with pytest.raises(DatasetError):
        load_kmer_table(f, 4)


def test_from_freqs_orders_by_frequency():
    h = ValueHistogram.from_freqs([1, 5, 2])
    assert list(h.freqs) == [5, 2, 1]
