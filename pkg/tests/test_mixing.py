import numpy as np
import pytest

from consensus_lab.core.errors import MixingValidationError, ParameterError
from consensus_lab.network.mixing import MixingMatrix, metropolis_weights, validate_mixing
from consensus_lab.network.topology import Graph, build_topology
from helpers import dense_z


def test_path3_metropolis_weights(path3_mixing):
    expected = np.array([[2 / 3, 1 / 3, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])
    np.testing.assert_allclose(path3_mixing.W, expected, atol=1e-15)


def test_two_nodes_average():
    W = metropolis_weights(Graph.from_edges(2, [(0, 1)])).W
    np.testing.assert_allclose(W, [[0.5, 0.5], [0.5, 0.5]])


def test_ring20_row_sparsity(ring20_mixing):
    assert all(np.count_nonzero(row) == 3 for row in ring20_mixing.W)


def test_path3_spectrum(path3_mixing):
    report = validate_mixing(path3_mixing)
    np.testing.assert_allclose(path3_mixing.eigenvalues, [1.0, 2 / 3, 0.0], atol=1e-12)
    assert report.zeta == pytest.approx(2 / 3)
    assert report.kappa_Z == pytest.approx(1.0)
    assert report.spectral_gap == pytest.approx(1 / 3)
    assert report.diameter == 2


def test_ring20_worst_spectral_gap(ring20_mixing):
    report = validate_mixing(ring20_mixing)
    assert 0.965 <= report.lambda_2 <= 0.985
    assert report.lambda_n > -1


@pytest.mark.parametrize("kind", ["ring", "grid", "random_geometric"])
def test_metropolis_is_doubly_stochastic(kind):
    mixing = metropolis_weights(build_topology(kind, 20, seed=1))
    validate_mixing(mixing)
    np.testing.assert_allclose(mixing.W.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(mixing.W, mixing.W.T)
    assert mixing.W.min() >= 0


def test_identity_on_ring_rejected():
    g = build_topology("ring", 5)
    with pytest.raises(MixingValidationError) as err:
        validate_mixing(MixingMatrix(g, np.eye(5)))
    assert err.value.condition == "edge-weight-positive"


def test_weight_off_graph_rejected(path3):
    W = np.full((3, 3), 1 / 3)
    with pytest.raises(MixingValidationError) as err:
        validate_mixing(MixingMatrix(path3, W))
    assert err.value.condition == "sparsity"


def test_asymmetric_rejected(path3):
    W = np.array([[0.5, 0.5, 0], [0.25, 0.5, 0.25], [0, 0.5, 0.5]])
    with pytest.raises(MixingValidationError) as err:
        validate_mixing(MixingMatrix(path3, W))
    assert err.value.condition == "symmetric"


def test_row_sums_checked(path3):
    W = np.array([[0.5, 0.4, 0], [0.4, 0.2, 0.4], [0, 0.4, 0.5]])
    with pytest.raises(MixingValidationError) as err:
        validate_mixing(MixingMatrix(path3, W))
    assert "stochastic" in err.value.condition


def test_lambda_n_equal_to_minus_one_rejected():
    g = Graph.from_edges(2, [(0, 1)])
    with pytest.raises(MixingValidationError) as err:
        validate_mixing(MixingMatrix(g, np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert err.value.condition == "lambda_n > -1"


def test_disconnected_graph_has_no_metropolis_matrix():
    with pytest.raises(ParameterError):
        metropolis_weights(Graph.from_edges(4, [(0, 1), (2, 3)]))


def test_lazy_matrix(path3_mixing):
    lazy = path3_mixing.lazy()
    np.testing.assert_allclose(lazy.W, 0.5 * (path3_mixing.W + np.eye(3)))
    assert lazy.lambda_n >= 0.0


@pytest.mark.parametrize(
    "graph",
    [
        Graph.from_edges(3, [(0, 1), (1, 2)], kind="path"),
        build_topology("ring", 20),
        build_topology("grid", 20),
        build_topology("random_geometric", 20, seed=4),
    ],
    ids=["path3", "ring20", "grid4x5", "rg20"],
)
def test_disagreement_operator_norm_is_one_minus_lambda_n(graph):
    mixing = metropolis_weights(graph)
    sigma_max = np.linalg.svd(dense_z(mixing.W, 2), compute_uv=False)[0]
    assert sigma_max == pytest.approx(mixing.kappa_z, rel=1e-10)
    assert validate_mixing(mixing).kappa_Z == pytest.approx(mixing.kappa_z, rel=1e-12)
