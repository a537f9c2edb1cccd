import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


@pytest.fixture(scope="session")
def default_scan():
    """Default 81-point scan over [0, 40] with its wall time."""
    import time

    from lattice_addressing.stirap import fidelity_scan

    start = time.perf_counter()
    curve = fidelity_scan()
    return curve, time.perf_counter() - start
