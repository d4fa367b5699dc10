# tests/conftest.py
import os
import sys

import pytest

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from backend.fractional_time import derive_hurst_params  # noqa: E402
from backend.quadrature import QuadratureSpec  # noqa: E402
from backend.rng import RngSpec  # noqa: E402
from backend.spatial_kernels import KernelFamily, KernelSpec  # noqa: E402


@pytest.fixture
def hp75():
    return derive_hurst_params(0.75)


@pytest.fixture
def hp80():
    return derive_hurst_params(0.8)


@pytest.fixture
def fast_quad():
    return QuadratureSpec(rel_tolerance=1e-7)


@pytest.fixture
def rng():
    return RngSpec(seed=12345)


@pytest.fixture
def riesz_1d():
    return KernelSpec(KernelFamily.RIESZ, 0.5, 1)


@pytest.fixture
def heat_1d():
    return KernelSpec(KernelFamily.HEAT, 0.5, 1)


@pytest.fixture
def white_1d():
    return KernelSpec(KernelFamily.WHITE, 0.0, 1)
