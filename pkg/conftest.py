import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from grid_field import make_grid
from helmholtz import HelmholtzParams


@pytest.fixture
def box_grid():
    """Default reproduction grid: [-16, 16), 4096 points."""
    return make_grid(16.0, 4096)


@pytest.fixture
def unit_grid():
    """[-pi, pi) with 64 points; grid wavenumbers are integers."""
    return make_grid(np.pi, 64)


@pytest.fixture
def params():
    return HelmholtzParams(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
