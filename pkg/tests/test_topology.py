import networkx as nx
import numpy as np
import pytest

from consensus_lab.core.errors import ParameterError, TopologyError
from consensus_lab.network.topology import Graph, TopologySpec, build_topology


def test_ring_has_one_edge_per_node():
    g = build_topology("ring", 4)
    assert len(g.edges) == 4
    assert all(g.degree(i) == 2 for i in range(4))
    assert g.diameter == 2


def test_grid_4x5_edge_count():
    g = build_topology("grid", 20, rows=4, cols=5)
    # 4 rows of 4 horizontal edges, 3 layers of 5 vertical edges
    assert len(g.edges) == 31
    assert g.is_connected()
    assert g.diameter == 7


def test_grid_defaults_to_most_square_factorization():
    spec = TopologySpec(kind="grid", n=20)
    assert (spec.rows, spec.cols) == (4, 5)
    assert spec.label == "grid4x5"


def test_random_geometric_deterministic_and_connected():
    a = build_topology("random_geometric", 20, seed=3, radius=0.35)
    b = build_topology("random_geometric", 20, seed=3, radius=0.35)
    assert a.is_connected()
    assert a.edges == b.edges
    assert a.positions.shape == (20, 2)
    np.testing.assert_array_equal(a.positions, b.positions)


def test_random_geometric_gives_up_when_radius_tiny():
    with pytest.raises(TopologyError):
        build_topology("random_geometric", 20, seed=0, radius=1e-4)


def test_edges_are_normalized():
    g = Graph.from_edges(3, [(1, 0), (0, 1), (2, 1)])
    assert g.edges == frozenset({(0, 1), (1, 2)})
    assert g.neighbors(1) == (0, 2)
    assert g.has_edge(2, 1)


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 3)]])
def test_bad_edges_rejected(edges):
    with pytest.raises(ParameterError):
        Graph.from_edges(3, edges)


def test_invalid_dimensions():
    with pytest.raises(ParameterError):
        build_topology("grid", 20, rows=3, cols=5)
    with pytest.raises(ParameterError):
        build_topology("ring", 1)
    with pytest.raises(ValueError):
        TopologySpec(kind="grid", n=20, rows=3, cols=7)


def test_networkx_round_trip():
    g = build_topology("ring", 6)
    h = Graph.from_networkx(g.to_networkx(), kind="ring")
    assert h == g
    assert nx.is_isomorphic(g.to_networkx(), nx.cycle_graph(6))
