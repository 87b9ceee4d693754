"""
Building and querying a compressed static function
===================================================

A CSF stores a key -> value map in about delta * (average code length)
bits per key.  Keys are never stored, so asking for a key that was not
inserted returns garbage (or fails to decode).
"""

# %%
import numpy as np

from autocsf import build_csf, gen_synthetic, Uniform
from autocsf.huffman import avg_code_length

ds = gen_synthetic(N=20_000, alpha=0.0, minority=Uniform(100), seed=1)
h = ds.histogram()
print(f"N={h.N} n={h.n} alpha={h.alpha:.3f} H0={h.h0:.3f} bits")

# %%
idx = build_csf(ds, seed=7)
values, ok = idx.query_hashes(ds.hashes(0))
print("exact on every key:", bool(ok.all() and np.array_equal(values, ds.values)))

# %% [markdown]
# The size splits into the solved bit array, the value dictionary and the
# code-length table.  Compare against delta times the Huffman average.

# %%
rep = idx.size_report()
for name, bits in rep.items():
    print(f"{name:>14}: {bits}")
print("delta * avg code length =", round(idx.delta * avg_code_length(idx.code, h), 3))

# %%
print("key 0 ->", idx.query(ds.key(0)), "(stored:", int(ds.values[0]), ")")
