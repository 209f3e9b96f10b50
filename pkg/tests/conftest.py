import numpy as np
import pytest
from hypothesis import settings

from coinfdr.densities import DiscretePrior

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_prior(rng, max_atoms=6, lo=-2.0, hi=2.0) -> DiscretePrior:
    """Random discrete prior with log10-atoms in [lo, hi]."""
    k = int(rng.integers(1, max_atoms + 1))
    atoms = np.sort(10.0 ** rng.uniform(lo, hi, k))
    atoms = np.unique(atoms)
    w = rng.dirichlet(np.ones(atoms.size))
    w /= w.sum()
    return DiscretePrior(atoms, w)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tpd():
    return DiscretePrior(np.array([1.0, 10.0]), np.array([0.7, 0.3]))
