import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from mixbayes.core import AtomicMixture

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CASE1 = AtomicMixture([-3.0, -1.0, 1.0, 3.0], [0.25] * 4)


@st.composite
def mixtures(draw, max_atoms=6, bound=6.0, min_weight=0.0):
    k = draw(st.integers(1, max_atoms))
    atoms = draw(st.lists(st.floats(-bound, bound, allow_nan=False), min_size=k, max_size=k))
    raw = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    w = np.asarray(raw) / np.sum(raw)
    if min_weight:
        w = np.maximum(w, min_weight)
        w = w / w.sum()
    return AtomicMixture(atoms, w)


def random_mixture(rng, max_atoms=6, bound=6.0):
    k = int(rng.integers(1, max_atoms + 1))
    return AtomicMixture(rng.uniform(-bound, bound, k), rng.dirichlet(np.ones(k)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
