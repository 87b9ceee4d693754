"""Compressed static functions with automatic, provably safe pre-filtering."""

from .auto import (BoundReport, FilteredCsfIndex, build_auto, build_filtered, build_plain, decide,
                   load_index, lower_bound, measure, measured_savings, query_auto, save_index,
                   upper_bound)
from .bcsf import bcsf_csf_cost, bcsf_decide, build_bcsf
from .csf import CsfIndex, DecodeError, FormatError, build_csf, query_csf
from .dataset import (KeyValueDataset, Uniform, Unique, ValueHistogram, Zipf, gen_synthetic,
                      histogram, load_kmer_table)
from .filters import FilterFamily, FilterSpec, build_filter, enumerate_specs, query_filter
from .huffman import CanonicalCode, avg_code_length, build_code, decode_prefix
from .linsys import DELTA3, DELTA4, Gf2System, UnsolvableError, solve, verify

__version__ = "0.1.0"
