import numpy as np
import pytest

from autocsf.dataset import synthetic_keys
from autocsf.hashing import hash_keys


@pytest.fixture(scope="session")
def probe_hashes():
    """Hashes of 10^6 fresh keys that no test inserts anywhere."""
    return hash_keys(synthetic_keys(1_000_000, seed=0xFEED_F00D))
