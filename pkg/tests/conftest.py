import warnings

import numpy as np
import pytest

from cilab.beltrami import build_families
from cilab.grid import GridSpec
from cilab.iteration import initial_triple, iterate
from cilab.parameters import make_schedule

warnings.filterwarnings("ignore", message="mollification length .* below 2h")


@pytest.fixture(scope="session")
def families():
    return build_families()


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32)


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(64)


@pytest.fixture(scope="session")
def desk_schedule():
    return make_schedule(0.05, lambda0=4, stages=2)


@pytest.fixture(scope="session")
def seed_triple(grid32):
    return initial_triple(4, 0.05, grid32)


@pytest.fixture(scope="session")
def small_step(seed_triple, desk_schedule, families, grid32):
    """One inductive step on the 32-grid, shared across tests."""
    new = iterate(seed_triple, desk_schedule, families, grid32, substeps=16)
    return seed_triple, new


def rng(seed=0):
    return np.random.default_rng(seed)
