import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flowchain.graphs import diamond, diamond_kernel
from flowchain.invariant import solve_invariant_exact
from flowchain.kernel import DiscreteReward
from flowchain.splitchain import DiscreteMinorizedKernel


@pytest.fixture(scope="session")
def diamond_dag():
    return diamond()


@pytest.fixture(scope="session")
def diamond_k():
    return diamond_kernel()


@pytest.fixture(scope="session")
def diamond_lambda(diamond_k):
    return solve_invariant_exact(diamond_k)


@pytest.fixture(scope="session")
def diamond_reward():
    return DiscreteReward({3: 1.0, 4: 4.0})


@pytest.fixture(scope="session")
def two_state_mk():
    # the (5/17, 12/17) instance: remainder row 0 is (0.3, 0.7)
    return DiscreteMinorizedKernel(
        matrix=np.array([[0.4, 0.6], [0.5, 0.5]]),
        epsilon=np.array([0.5, 1.0]),
        nu=np.array([0.5, 0.5]),
    )
