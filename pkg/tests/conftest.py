import numpy as np
import pytest

from hetswarm.genome import Genome
from hetswarm.sim import SimConfig, Trajectory


@pytest.fixture
def small_config():
    return SimConfig(n_agents=8, world_width=200.0, world_height=200.0, horizon=60)


@pytest.fixture
def dummy_genome():
    return Genome.from_values([0.0] * 8 + [0.5])


def build_trajectory(poses, types=None, config=None, genome=None, seed=0):
    """Trajectory from hand-built pose arrays for synthetic feature tests."""
    poses = np.asarray(poses, dtype=np.float64)
    horizon, n = poses.shape[0], poses.shape[1]
    if config is None:
        config = SimConfig(n_agents=max(n, 2), world_width=200.0, world_height=200.0, horizon=horizon)
    if types is None:
        types = np.zeros(n, dtype=np.uint8)
        types[n // 2 :] = 1
    if genome is None:
        genome = Genome.from_values([0.0] * 8 + [0.5])
    return Trajectory(
        poses=poses,
        types=np.asarray(types, dtype=np.uint8),
        genome=genome,
        seed=seed,
        config=config,
    )
