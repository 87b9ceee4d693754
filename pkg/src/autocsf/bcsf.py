"""Bloom-filter-augmented CSF heuristic used as the comparison baseline.

The heuristic models the CSF at ``C_CSF(H0)`` bits/key with a fitted
piecewise curve and the Bloom filter at ``C_BF * log2(1/eps)`` bits/key,
then minimises the sum in closed form.  Because it ignores ``n/N`` and the
discreteness of real filters it can recommend filters that cost space,
most visibly on high-entropy minorities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from . import linsys
from .auto import AnyIndex, build_filtered, build_plain
from .dataset import KeyValueDataset, ValueHistogram
from .filters import FilterSpec

C_BF = 1.44
LOG2_E = math.log2(math.e)


def bcsf_csf_cost(h0: float) -> float:
    """Fitted CSF bits/key as a function of the value entropy."""
    if h0 < 0:
        raise ValueError("entropy must be non-negative")
    if h0 < 2:
        return 0.22 * h0 * h0 + 0.18 * h0 + 1.16
    return 1.1 * h0 + 0.2


@dataclass(frozen=True)
class BcsfDecision:
    alpha: float
    h0: float
    c_bf: float
    c_csf: float
    eps_star: float
    alpha_threshold: float
    use_filter: bool

    def bloom_spec(self) -> FilterSpec:
        """Bloom realisation of ``eps_star`` under the idealised sizing model."""
        if not 0 < self.eps_star < 1:
            raise ValueError("no filter to realise")
        bpe = self.c_bf * math.log2(1.0 / self.eps_star)
        k = max(1, round(bpe * math.log(2)))
        return FilterSpec.bloom(k, bpe)


def bcsf_decide_params(alpha: float, h0: float, c_bf: float = C_BF) -> BcsfDecision:
    c_csf = bcsf_csf_cost(h0)
    if alpha <= 0:
        eps_star = math.inf
    elif alpha >= 1:
        eps_star = 0.0
    else:
        eps_star = (c_bf / c_csf) * ((1 - alpha) / alpha) * LOG2_E
    threshold = c_bf * LOG2_E / (c_csf + c_bf * LOG2_E)
    use = eps_star < 1 and alpha > threshold
    return BcsfDecision(alpha, h0, c_bf, c_csf, eps_star, threshold, use)


def bcsf_decide(h: ValueHistogram) -> BcsfDecision:
    return bcsf_decide_params(h.alpha, h.h0)


def build_bcsf(ds: KeyValueDataset, seed: int = 0, mode: linsys.DeltaMode = linsys.DELTA3,
               value_bits: Union[int, str] = "auto") -> tuple[AnyIndex, BcsfDecision]:
    """Build the heuristic's index: filtered when it says so, else plain."""
    h = ds.histogram()
    dec = bcsf_decide(h)
    if dec.use_filter and dec.eps_star > 0:
        return build_filtered(ds, dec.bloom_spec(), mode, seed, h, value_bits), dec
    return build_plain(ds, mode, seed, value_bits), dec

