import numpy as np
import pytest

from consensus_lab.core.errors import NumericError, ParameterError
from consensus_lab.objectives.generate import generate_dataset, scale_to_unit_lipschitz
from consensus_lab.objectives.problem import (
    Problem,
    Shard,
    global_stationarity,
    lipschitz_constants,
    local_prox,
    local_value,
    minimal_subgradient,
    nonsmooth_value,
    objective_value,
    sigma_max,
    smooth_gradient,
    soft_threshold,
)
from helpers import single_agent_problem


def test_generated_shapes():
    problem, truth = generate_dataset("ridge", n=20, d_i=500, m=50, seed=0)
    assert problem.n == 20
    assert all(s.A.shape == (500, 50) and s.b.shape == (500,) for s in problem.shards)
    assert problem.L_max <= 1.0 + 1e-12
    assert truth.x_true.shape == (50,)


def test_elastic_net_support():
    _, truth = generate_dataset("elastic_net", n=4, d_i=30, m=50, seed=2, sparsity=15)
    assert len(truth.support) == 15
    assert np.count_nonzero(truth.x_true) == 15
    assert set(np.flatnonzero(truth.x_true)) == set(truth.support)


def test_same_seed_same_data():
    a, _ = generate_dataset("logistic", n=3, d_i=10, m=4, seed=9)
    b, _ = generate_dataset("logistic", n=3, d_i=10, m=4, seed=9)
    for sa, sb in zip(a.shards, b.shards):
        np.testing.assert_array_equal(sa.A, sb.A)
        np.testing.assert_array_equal(sa.b, sb.b)
    assert set(np.unique(a.shards[0].b)) <= {-1.0, 1.0}


def test_sparsity_above_dimension_rejected():
    with pytest.raises(ParameterError):
        generate_dataset("elastic_net", n=2, d_i=5, m=4, seed=0, sparsity=5)


def test_scale_to_unit_lipschitz():
    p = single_agent_problem(2.0 * np.eye(2), [0.0, 0.0])
    # sigma_max^2 / d = 4 / 2 = 2
    assert p.L_max == pytest.approx(2.0)
    scaled = scale_to_unit_lipschitz(p)
    assert scaled.L_max == pytest.approx(1.0)
    small = single_agent_problem(np.eye(2), [0.0, 0.0])
    assert scale_to_unit_lipschitz(small) is small


def test_ridge_gradient_by_hand():
    p = single_agent_problem([[2.0]], [4.0])
    np.testing.assert_allclose(smooth_gradient(p, 0, np.array([3.0])), [4.0])


def test_logistic_gradient_at_origin():
    a = np.array([[1.0, -2.0, 0.5]])
    p = single_agent_problem(a, [-1.0], kind="logistic")
    np.testing.assert_allclose(smooth_gradient(p, 0, np.zeros(3)), 0.5 * a[0])


def test_gradient_rejects_non_finite():
    p = single_agent_problem([[1.0]], [1.0])
    with pytest.raises(NumericError):
        smooth_gradient(p, 0, np.array([np.nan]))


def test_soft_threshold():
    assert soft_threshold(np.array([3.0]), 1.0)[0] == 2.0
    assert soft_threshold(np.array([-0.5]), 1.0)[0] == 0.0


def test_prox_is_identity_for_smooth_problems():
    p = single_agent_problem([[1.0]], [1.0])
    np.testing.assert_array_equal(local_prox(p, 0.5, np.array([0.1])), [0.1])
    with pytest.raises(ParameterError):
        local_prox(p, 0.0, np.array([0.1]))


def test_lipschitz_ridge_identity():
    m = 5
    p = single_agent_problem(np.eye(m), np.zeros(m), lam=0.01)
    assert p.L_max == pytest.approx(1 / m + 0.01)


def test_lipschitz_logistic_single_sample():
    p = single_agent_problem([[2.0, 0.0]], [1.0], kind="logistic")
    assert p.L_max == pytest.approx(1.0)


def test_zero_data_has_zero_lipschitz():
    p = single_agent_problem(np.zeros((3, 2)), np.zeros(3))
    L, L_max = lipschitz_constants(p)
    assert L_max == 0.0
    assert sigma_max(np.zeros((3, 2))) == 0.0


def test_power_iteration_matches_svd():
    A = np.random.default_rng(4).standard_normal((30, 250))
    assert sigma_max(A) == pytest.approx(np.linalg.svd(A, compute_uv=False)[0], rel=1e-5)


def test_ridge_closed_form_is_minimal(small_ridge):
    H = sum(s.A.T @ s.A / s.d + small_ridge.lam * np.eye(small_ridge.m) for s in small_ridge.shards)
    g = sum(s.A.T @ s.b / s.d for s in small_ridge.shards)
    x = np.linalg.solve(H, g)
    base = objective_value(small_ridge, x)
    assert global_stationarity(small_ridge, x) < 1e-10
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert objective_value(small_ridge, x + 1e-3 * rng.standard_normal(small_ridge.m)) > base


def test_logistic_value_at_origin():
    problem, _ = generate_dataset("logistic", n=3, d_i=7, m=2, seed=0)
    assert objective_value(problem, np.zeros(2)) == pytest.approx(3 * problem.scale * np.log(2))


def test_elastic_net_value_at_origin(small_elastic_net):
    problem, _ = small_elastic_net
    expected = problem.scale * sum(s.b @ s.b / (2 * s.d) for s in problem.shards)
    assert objective_value(problem, np.zeros(problem.m)) == pytest.approx(expected)


def test_minimal_subgradient():
    g = np.array([0.5, -0.05, 0.2])
    x = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(minimal_subgradient(g, x, 0.1), [0.6, 0.0, 0.1])


def test_invalid_problems():
    with pytest.raises(ParameterError):
        Problem(kind="logistic", shards=(Shard(np.ones((1, 1)), np.array([0.5])),), m=1)
    with pytest.raises(ParameterError):
        Problem(kind="elastic_net", shards=(Shard(np.ones((1, 1)), np.array([1.0])),), m=1, lam1=0.1)
    with pytest.raises(ParameterError):
        Problem(kind="ridge", shards=(Shard(np.ones((2, 3)), np.array([1.0])),), m=3)


@pytest.mark.parametrize("kind", ["ridge", "logistic", "elastic_net"])
def test_gradients_match_finite_differences(kind):
    problem, _ = generate_dataset(kind, n=2, d_i=15, m=4, seed=21)
    rng = np.random.default_rng(0)
    h = 1e-6

    def smooth(i, x):
        # elastic net: the l1 term is handled by the prox, not the gradient
        return local_value(problem, i, x) - nonsmooth_value(problem, x)

    for _ in range(20):
        x = rng.standard_normal(problem.m)
        for i in range(problem.n):
            numeric = np.array(
                [(smooth(i, x + h * e) - smooth(i, x - h * e)) / (2 * h) for e in np.eye(problem.m)]
            )
            analytic = smooth_gradient(problem, i, x)
            assert np.linalg.norm(numeric - analytic) <= 1e-5 * max(1.0, np.linalg.norm(analytic))


def test_soft_threshold_is_nonexpansive():
    rng = np.random.default_rng(5)
    for _ in range(200):
        a, b = rng.standard_normal((2, 7)) * rng.uniform(0.1, 3.0)
        t = rng.uniform(0.0, 2.0)
        assert np.linalg.norm(soft_threshold(a, t) - soft_threshold(b, t)) <= np.linalg.norm(a - b) + 1e-15


@pytest.mark.parametrize("kind,kw", [("ridge", {}), ("elastic_net", {"sparsity": 3}), ("logistic", {})])
def test_strong_convexity_lower_bounds_gradient_monotonicity(kind, kw):
    problem, _ = generate_dataset(kind, n=3, d_i=25, m=6, seed=21, **kw)
    mu = problem.strong_convexity
    assert mu.shape == (3,)
    if kind == "logistic":
        np.testing.assert_array_equal(mu, 0.0)
    else:
        assert np.all(mu > 0)
    rng = np.random.default_rng(8)
    for i in range(problem.n):
        for _ in range(20):
            x, y = rng.standard_normal((2, problem.m))
            gap = (smooth_gradient(problem, i, x) - smooth_gradient(problem, i, y)) @ (x - y)
            assert gap >= mu[i] * np.sum((x - y) ** 2) - 1e-12
