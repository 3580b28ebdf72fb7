import numpy as np
import pytest
from hypothesis import settings

from graphmgm.graph import from_edges

settings.register_profile("ci", max_examples=50, deadline=None)
settings.register_profile("dev", max_examples=10, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def pair_graph():
    return from_edges([0], [1], directed=False)


@pytest.fixture
def cycle3():
    return from_edges([0, 1, 2], [1, 2, 0], directed=True)


@pytest.fixture
def star5():
    return from_edges([0] * 5, [1, 2, 3, 4, 5], directed=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
