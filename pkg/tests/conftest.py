import numpy as np
import pytest

from ldplab.spaces import SpaceDiscretization


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def torus64():
    return SpaceDiscretization("periodic", 64)


@pytest.fixture
def interval32():
    return SpaceDiscretization("dirichlet", 32)


def smooth_state(space, amplitude=1.0):
    """A smooth initial state respecting the space's boundary conditions."""
    freq = 2 * np.pi if space.periodic else np.pi
    return amplitude * np.sin(freq * space.nodes)
