import numpy as np
import pytest

from consensus_lab.diagnostics.oracle import ORACLE_TOL, centralized_oracle
from consensus_lab.objectives.generate import generate_dataset
from consensus_lab.objectives.problem import global_stationarity, smooth_gradient
from helpers import single_agent_problem


def test_exact_interpolation():
    result = centralized_oracle(single_agent_problem([[1.0]], [2.0]))
    np.testing.assert_allclose(result.x_star, [2.0])
    assert result.f_star == pytest.approx(0.0, abs=1e-20)


def test_ridge_stationarity(small_ridge):
    result = centralized_oracle(small_ridge)
    assert result.stationarity <= ORACLE_TOL * small_ridge.n
    assert global_stationarity(small_ridge, result.x_star) == pytest.approx(result.stationarity)


def test_logistic_newton():
    problem, _ = generate_dataset("logistic", n=3, d_i=40, m=4, seed=5)
    result = centralized_oracle(problem)
    assert result.stationarity <= ORACLE_TOL
    assert result.iterations >= 1


def test_elastic_net_optimality_conditions(small_elastic_net):
    problem, _ = small_elastic_net
    result = centralized_oracle(problem)
    x = result.x_star
    g = sum(smooth_gradient(problem, i, x) for i in range(problem.n))
    threshold = problem.n * problem.l1
    zero = x == 0.0
    assert np.all(np.abs(g[zero]) <= threshold + 1e-10)
    np.testing.assert_allclose(g[~zero] + threshold * np.sign(x[~zero]), 0.0, atol=1e-9)
    assert result.stationarity <= ORACLE_TOL
