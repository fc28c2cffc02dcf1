import numpy as np
import pytest

from robust_node.dynamics import ControlSchedule, TimeGrid
from robust_node.task import ClassTargets, Dataset, PerturbedBatch, perturbation_offsets


def make_small_batch(rng, M=3, N=2, d=2, spread=1.0):
    points = rng.uniform(0.0, spread, size=(M, d))
    labels = rng.integers(0, 2, size=M)
    ds = Dataset(points, labels, seed=0, margin=0.05)
    return PerturbedBatch(ds, perturbation_offsets(M, N, 0.02, seed=0), 0.02)


def random_simplex(rng, M, N):
    g = rng.uniform(0.0, 1.0, size=(M, N))
    return g / g.sum(axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def targets():
    return ClassTargets()


@pytest.fixture
def small_instance(rng):
    """d=2, M=3, N=2, L=10 with random controls and weights."""
    grid = TimeGrid(1.0, 10)
    u = ControlSchedule.random(grid, 2, scale=1.0, seed=rng.integers(1 << 31))
    batch = make_small_batch(rng)
    gamma = random_simplex(rng, 3, 2)
    return grid, u, batch, gamma
