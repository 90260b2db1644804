import numpy as np
import pytest

from koopman_lyap import LyapunovEstimator, brusselator, lienard, sample_trajectories
from koopman_lyap.dynamics import grid_points

REFERENCE_SAMPLING = dict(n_traj=50, horizon=5.0, delta=0.2)


@pytest.fixture(scope="session")
def lienard_data():
    return sample_trajectories(lienard(), seed=0, **REFERENCE_SAMPLING)


@pytest.fixture(scope="session")
def lienard_fit(lienard_data):
    return LyapunovEstimator().fit(lienard_data.x, lienard_data.y)


@pytest.fixture(scope="session")
def brusselator_data():
    return sample_trajectories(brusselator(), seed=0, **REFERENCE_SAMPLING)


@pytest.fixture(scope="session")
def eval_grid():
    return grid_points([-1.5, -1.5], [1.5, 1.5], 41)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
