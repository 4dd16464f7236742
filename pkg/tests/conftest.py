import numpy as np
import pytest

from f3d import world


@pytest.fixture(scope="session")
def lift_episode():
    return world.expert_demo("lift", "red", seed=3)


@pytest.fixture(scope="session")
def push_episode():
    return world.expert_demo("push_away", "blue", seed=11)


@pytest.fixture(scope="session")
def stack_episode():
    return world.expert_demo("stack", "red", seed=5, support="blue")


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
