import numpy as np
import pytest

from consensus_lab.network.mixing import metropolis_weights
from consensus_lab.network.topology import Graph, build_topology
from consensus_lab.objectives.generate import generate_dataset


@pytest.fixture
def path3():
    # 0 - 1 - 2
    return Graph.from_edges(3, [(0, 1), (1, 2)], kind="path")


@pytest.fixture
def path3_mixing(path3):
    return metropolis_weights(path3)


@pytest.fixture
def ring4_mixing():
    return metropolis_weights(build_topology("ring", 4))


@pytest.fixture
def ring20_mixing():
    return metropolis_weights(build_topology("ring", 20))


@pytest.fixture
def small_ridge():
    problem, _ = generate_dataset("ridge", n=4, d_i=30, m=5, seed=7)
    return problem


@pytest.fixture
def small_elastic_net():
    return generate_dataset("elastic_net", n=4, d_i=40, m=8, seed=11, sparsity=3)
