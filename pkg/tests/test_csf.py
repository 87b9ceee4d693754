import numpy as np
import pytest

from autocsf.csf import (CsfIndex, DecodeError, FormatError, MAX_RETRIES, build_csf,
                         planned_size_bits, query_csf)
from autocsf.dataset import KeyValueDataset, Uniform, Unique, Zipf, gen_synthetic
from autocsf.huffman import avg_code_length
from autocsf.linsys import DELTA3, DELTA4


def small_ds(values):
    return KeyValueDataset([f"key-{i}".encode() for i in range(len(values))], values)


def check_exact(idx, ds):
    values, ok = idx.query_hashes(ds.hashes(0))
    assert ok.all()
    assert np.array_equal(values, ds.values)


def test_single_value():
    ds = small_ds([42] * 100)
    idx = build_csf(ds, value_bits=64)
    check_exact(idx, ds)
    rep = idx.size_report()
    assert rep["d_e"] == 0 and rep["d_v"] == 64
    assert rep["array_bits"] == DELTA3.num_vars(100)
    # the array holds ceil(delta * N) bits
    overhead = rep["d_v"] + rep["d_e"] + rep["metadata_bits"]
    assert idx.bpk <= (np.ceil(1.089 * 100) + overhead) / 100
    assert all(query_csf(idx, ds.key(i)) == 42 for i in range(100))


def test_uniform_four_keys_array_bits():
    ds = small_ds([1, 2, 3, 4])
    idx = build_csf(ds)
    check_exact(idx, ds)
    assert idx.size_report()["array_bits"] == 9


def test_codebook_bits_small_example():
    ds = small_ds([0] * 5 + [1] * 2 + [2, 3])
    idx = build_csf(ds)
    check_exact(idx, ds)
    assert idx.code.l_max == 3
    assert idx.size_report()["d_e"] == 8


def test_size_components_sum():
    ds = gen_synthetic(30_000, 0.6, Zipf(1.5), seed=4)
    rep = build_csf(ds).size_report()
    assert rep["array_bits"] + rep["d_v"] + rep["d_e"] + rep["metadata_bits"] == rep["size_bits"]


@pytest.mark.parametrize("N", [20_000, 100_000])
def test_uniform_size_matches_cost_formula(N):
    ds = gen_synthetic(N, 0.0, Uniform(100), seed=8)
    idx = build_csf(ds)
    check_exact(idx, ds)
    h = ds.histogram()
    avg = avg_code_length(idx.code, h)
    rep = idx.size_report()
    model = idx.delta * avg * N + idx.code.d_v_bits + idx.code.d_e_bits
    assert rep["size_bits"] == pytest.approx(model, rel=0.05)
    with_meta = idx.delta * avg + (rep["d_v"] + rep["d_e"] + rep["metadata_bits"]) / N
    assert idx.bpk == pytest.approx(with_meta, rel=0.05)


@pytest.mark.parametrize("dist", [Uniform(100), Zipf(1.5), Unique()])
@pytest.mark.parametrize("alpha", [0.0, 0.5, 0.9])
def test_bpk_window(dist, alpha):
    ds = gen_synthetic(20_000, alpha, dist, seed=1)
    idx = build_csf(ds)
    check_exact(idx, ds)
    avg = avg_code_length(idx.code, ds.histogram())
    upper = idx.delta * avg + (idx.code.d_v_bits + idx.code.d_e_bits) / ds.N + 0.1
    assert avg <= idx.bpk <= upper


def test_exact_on_large_build():
    ds = gen_synthetic(100_000, 0.7, Zipf(1.5), seed=12)
    idx = build_csf(ds, seed=5)
    check_exact(idx, ds)
    assert idx.n_chunks > 1


def test_rebuild_with_other_seed_same_answers():
    ds = gen_synthetic(40_000, 0.5, Uniform(100), seed=2)
    a = build_csf(ds, seed=1)
    b = build_csf(ds, seed=99)
    va, _ = a.query_hashes(ds.hashes(0))
    vb, _ = b.query_hashes(ds.hashes(0))
    assert np.array_equal(va, vb)
    assert not np.array_equal(a.words[:10], b.words[:10])


def test_build_is_deterministic():
    ds = gen_synthetic(30_000, 0.5, Uniform(100), seed=2)
    assert build_csf(ds, seed=3).to_bytes() == build_csf(ds, seed=3).to_bytes()


def test_out_of_set_keys_never_crash():
    ds = gen_synthetic(20_000, 0.5, Uniform(100), seed=3)
    idx = build_csf(ds)
    strangers = [f"stranger-{i}".encode() for i in range(5000)]
    values, ok = idx.query_many(strangers)
    assert np.isin(values[ok], idx.code.values).all()
    for k in strangers[:200]:
        try:
            v = idx.query(k)
        except DecodeError:
            continue
        assert v in set(idx.code.values.tolist())


def test_undecodable_key_raises():
    # a one-value code only accepts the bit 0; force ones into the array
    ds = small_ds([7] * 50)
    idx = build_csf(ds)
    assert idx.query(ds.key(0)) == 7
    idx.words[:] = np.uint64(0xFFFFFFFFFFFFFFFF)
    assert idx.mode.arity % 2 == 1  # an odd number of ones XORs to 1
    with pytest.raises(DecodeError):
        idx.query(ds.key(0))
    values, ok = idx.query_hashes(ds.hashes(0))
    assert not ok.any()


def test_four_hash_mode():
    ds = gen_synthetic(50_000, 0.6, Unique(), seed=6)
    idx = build_csf(ds, mode=DELTA4)
    check_exact(idx, ds)
    assert idx.delta == pytest.approx(1.024)
    idx2 = CsfIndex.from_bytes(idx.to_bytes())
    check_exact(idx2, ds)


def test_sixty_four_bit_values():
    vals = [2**63 + 5, 2**40, 1, 2**63 + 5]
    ds = small_ds(vals)
    idx = build_csf(ds)
    assert idx.code.value_bits == 64
    check_exact(CsfIndex.from_bytes(idx.to_bytes()), ds)


def test_serialization_round_trip_and_size():
    ds = gen_synthetic(25_000, 0.3, Zipf(1.5), seed=9)
    idx = build_csf(ds)
    blob = idx.to_bytes()
    assert 8 * len(blob) == idx.size_bits
    check_exact(CsfIndex.from_bytes(blob), ds)


def test_planned_size_equals_built_size():
    for dist in (Uniform(100), Zipf(1.5), Unique()):
        ds = gen_synthetic(60_000, 0.8, dist, seed=5)
        assert planned_size_bits(ds.hashes(0), ds.values, seed=4) == build_csf(ds, seed=4).size_bits


def test_corrupt_containers():
    ds = gen_synthetic(2000, 0.5, Uniform(10), seed=1)
    blob = bytearray(build_csf(ds).to_bytes())
    with pytest.raises(FormatError):
        CsfIndex.from_bytes(bytes(blob[:10]))
    with pytest.raises(FormatError):
        CsfIndex.from_bytes(bytes(blob[:-8]))
    bad = bytearray(blob)
    bad[0:4] = b"XXXX"
    with pytest.raises(FormatError):
        CsfIndex.from_bytes(bytes(bad))
    bad = bytearray(blob)
    bad[4] = 99
    with pytest.raises(FormatError, match="version"):
        CsfIndex.from_bytes(bytes(bad))


def test_retry_budget_constant():
    assert MAX_RETRIES >= 16
