"""
Where the closed-form heuristic goes wrong
==========================================

The heuristic sizes a Bloom filter from an idealised cost model.  On a
minority with one value per key it still asks for a filter at alpha=0.5,
while the bound-based decision keeps the plain CSF.
"""

# %%
from autocsf import Unique, Uniform, build_auto, build_bcsf, build_plain, gen_synthetic

for dist in (Unique(), Uniform(100)):
    for alpha in (0.5, 0.8, 0.95):
        ds = gen_synthetic(100_000, alpha, dist, seed=3)
        plain = build_plain(ds, seed=3)
        auto, report = build_auto(ds, seed=3)
        heur, dec = build_bcsf(ds, seed=3)
        print(f"{dist!s:>16} alpha={alpha:.2f}  plain={plain.bpk:7.3f}  auto={auto.bpk:7.3f} "
              f"[{report.decision}]  heuristic={heur.bpk:7.3f} [filter={dec.use_filter}]")
