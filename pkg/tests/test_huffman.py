import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autocsf.dataset import ValueHistogram
from autocsf.huffman import (BitReader, CanonicalCode, CorruptStreamError, avg_code_length,
                             build_code, decode_prefix, huffman_lengths)


def kraft_optimum(freqs):
    """Brute force: cheapest Kraft-feasible length vector for ``freqs``.

    Enumerates every non-decreasing length multiset with lengths <= n-1 and
    assigns shorter lengths to larger frequencies (optimal for a fixed
    multiset by the rearrangement inequality).
    """
    n = len(freqs)
    if n == 1:
        return freqs[0]
    f = sorted(freqs, reverse=True)
    top = n - 1
    best = math.inf
    for lens in itertools.combinations_with_replacement(range(1, top + 1), n):
        if sum(1 << (top - l) for l in lens) > 1 << top:
            continue
        best = min(best, sum(a * b for a, b in zip(f, lens)))
    return best


def h0(freqs):
    p = np.asarray(freqs, float) / sum(freqs)
    return float(-(p * np.log2(p)).sum())


def code_for(freqs):
    h = ValueHistogram.from_freqs(freqs)
    return build_code(h), h


def test_small_example():
    code, h = code_for([5, 2, 1, 1])
    assert list(code.lengths) == [1, 2, 3, 3]
    assert avg_code_length(code, h) == pytest.approx(15 / 9)
    assert kraft_optimum([5, 2, 1, 1]) == 15
    assert h.h0 == pytest.approx(h0([5, 2, 1, 1]))
    assert h.h0 == pytest.approx(1.658, abs=1e-3)
    assert code.l_max == 3 and code.d_e_bits == 4 * 2


def test_trivial_codes():
    code, h = code_for([1, 1])
    assert list(code.lengths) == [1, 1]
    code, h = code_for([1, 1, 1, 1])
    assert list(code.lengths) == [2, 2, 2, 2]
    assert avg_code_length(code, h) == pytest.approx(2.0) == pytest.approx(h.h0)
    code, h = code_for([1])
    assert list(code.lengths) == [1]
    assert avg_code_length(code, h) == 1.0
    assert code.d_e_bits == 0


def test_codebook_sizes():
    code, _ = code_for([4, 3, 2, 1])
    assert code.d_v_bits == 4 * 64
    h = ValueHistogram.from_freqs([4, 3])
    assert build_code(h, value_bits=32).d_v_bits == 64


def test_canonical_codewords_prefix_free_and_ordered():
    code, _ = code_for([9, 7, 4, 4, 2, 1, 1, 1])
    words = [format(int(c), f"0{int(l)}b") for c, l in zip(code.codewords, code.lengths)]
    for a, b in itertools.permutations(words, 2):
        assert not b.startswith(a)
    order = sorted(range(len(words)), key=lambda i: (code.lengths[i], i))
    # canonical: numeric order follows (length, rank)
    vals = [int(code.codewords[i]) << (code.l_max - int(code.lengths[i])) for i in order]
    assert vals == sorted(vals)


def test_huffman_matches_exhaustive_optimum():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        f = rng.integers(1, 17, size=n).tolist()
        lengths = huffman_lengths(sorted(f, reverse=True))
        assert sum(a * b for a, b in zip(sorted(f, reverse=True), lengths)) == kraft_optimum(f)


def test_tie_break_is_deterministic():
    a = huffman_lengths([3, 3, 3, 3, 3])
    b = huffman_lengths([3, 3, 3, 3, 3])
    assert list(a) == list(b)
    # lower rank is merged later, so it never gets a longer code
    assert list(a) == sorted(a)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 1000), min_size=2, max_size=64))
def test_entropy_sandwich(freqs):
    code, h = code_for(freqs)
    avg = avg_code_length(code, h)
    assert h.h0 - 1e-9 <= avg < h.h0 + 1
    assert code.kraft_sum() == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 500), min_size=1, max_size=64))
def test_encode_decode_round_trip(freqs):
    code, _ = code_for(freqs)
    for v in code.values:
        bits = code.encode(int(v))
        reader = BitReader(bits + "0101")
        assert decode_prefix(code, reader) == v
        assert reader.consumed == len(bits)


def test_decode_first_symbol_consumes_one_bit():
    code, _ = code_for([1, 1])
    reader = BitReader("0111")
    assert decode_prefix(code, reader) == int(code.values[0])
    assert reader.consumed == 1


def test_decode_corrupt_stream():
    # a single-value code only uses "0", so all ones never decode
    code, _ = code_for([4])
    with pytest.raises(CorruptStreamError):
        decode_prefix(code, BitReader("1" * 10))
    code = CanonicalCode(values=np.array([1, 2, 3], np.uint64), lengths=np.array([2, 2, 2]))
    with pytest.raises(CorruptStreamError):
        decode_prefix(code, BitReader("1111"))
    full, _ = code_for([5, 2, 1, 1])
    with pytest.raises(CorruptStreamError):
        decode_prefix(full, BitReader("11"))


def test_removing_majority_mass_never_hurts():
    """Re-optimising after shrinking f0 costs no more than keeping the old lengths."""
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(2, 7))
        f = sorted(rng.integers(1, 17, size=n).tolist(), reverse=True)
        old = huffman_lengths(f)
        for f0 in range(1, f[0] + 1):
            g = [f0] + f[1:]
            new_cost = kraft_optimum(g)
            assert new_cost <= sum(a * b for a, b in zip(g, old))


def test_depth_cap():
    # Fibonacci weights give a maximally skewed tree
    fib = [1, 1]
    while len(fib) < 70:
        fib.append(fib[-1] + fib[-2])
    lengths = huffman_lengths(fib[::-1])
    assert lengths.max() <= 58
    assert sum(2.0 ** -int(l) for l in lengths) <= 1.0
