import numpy as np
import pytest

from traitlab.core import DEFAULT_GRID, Grid
from traitlab.kernels import bimodal_benchmark_selection
from traitlab.reproduction import make_plan


@pytest.fixture(scope="session")
def grid_default():
    return DEFAULT_GRID


@pytest.fixture(scope="session")
def grid_mid():
    return Grid(-16.0, 16.0, 512)


@pytest.fixture(scope="session")
def plan_default(grid_default):
    return make_plan(grid_default, 1.0)


@pytest.fixture(scope="session")
def plan_mid(grid_mid):
    return make_plan(grid_mid, 1.0)


@pytest.fixture(scope="session")
def bimodal():
    return bimodal_benchmark_selection(truncated=False)


@pytest.fixture(scope="session")
def bimodal_truncated():
    return bimodal_benchmark_selection(truncated=True)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
