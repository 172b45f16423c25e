import numpy as np
import pytest
from hypothesis import settings

from isomonodromy.connection_model import MeromorphicConnection

settings.register_profile("reproducible", derandomize=True, deadline=None)
settings.load_profile("reproducible")


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def simple_pole_connection(rng, poles=3, rank=2, scale=0.3, separation=0.5):
    """Random Fuchsian connection whose residues sum to zero."""
    while True:
        positions = random_complex(rng, poles)
        gaps = np.abs(positions[:, None] - positions[None, :]) + np.eye(poles) * 10
        if gaps.min() > separation:
            break
    residues = [scale * random_complex(rng, rank, rank) for _ in range(poles - 1)]
    residues.append(-sum(residues))
    return MeromorphicConnection(positions, tuple(r[None] for r in residues))


def dubrovin_connection(rng, scale=0.4):
    """One pole of order two at 0 and one simple pole, residues summing to zero."""
    leading = np.diag(random_complex(rng, 2))
    residue = scale * random_complex(rng, 2, 2)
    return MeromorphicConnection(np.array([0.0, 1.5]),
                                 (np.array([leading, residue]), -residue[None]))


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
