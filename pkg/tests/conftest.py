import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def circle5():
    from manifold_gnn import make_manifold

    return make_manifold("circle", 5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
