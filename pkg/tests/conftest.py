import numpy as np
import pytest

from skinrelax.model import model_from_arrays


def random_chain(rng, n_sites, reversible=True, energy_scale=1.0):
    """Chain with random energies and rates of order one."""
    energies = energy_scale * rng.normal(size=n_sites)
    hop_left = rng.uniform(0.2, 2.0, size=n_sites - 1)
    hop_right = rng.uniform(0.2, 2.0, size=n_sites - 1)
    if not reversible:
        hop_right[rng.random(n_sites - 1) < 0.5] = 0.0
    return model_from_arrays(energies, hop_left, hop_right)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
