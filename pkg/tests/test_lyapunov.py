import numpy as np
import pytest

from consensus_lab.core.errors import ConstantValidationError, ParameterError
from consensus_lab.diagnostics.lyapunov import (
    InnerTrace,
    TraceRecorder,
    critical_point_residual,
    lyapunov_constants,
    lyapunov_descent_check,
    lyapunov_value,
    metric_norm_sq,
    saddle_distance_margins,
    step_length_margins,
    subgradient_ratios,
)
from consensus_lab.diagnostics.oracle import centralized_oracle
from consensus_lab.network.mixing import validate_mixing
from consensus_lab.objectives.generate import generate_dataset
from consensus_lab.objectives.problem import stacked_value
from consensus_lab.solver.dp2g import AgentState, HybridParams, StoppingRule, default_stepsizes, inner_loop
from helpers import dense_z, saddle_duals


def test_constants_by_hand():
    k = lyapunov_constants(0.3, 1.0, 0.2)
    assert k.a == pytest.approx(2 / 3)
    assert k.b == pytest.approx(0.895)
    assert k.c == pytest.approx(0.145)


@pytest.mark.parametrize("alpha,L_max", [(0.1, 1.0), (0.05, 4.0), (0.25, 1.2)])
def test_a_is_delta_over_alpha(alpha, L_max):
    assert lyapunov_constants(alpha, L_max, 0.15).a == pytest.approx(0.15 / alpha)


def test_preconditions():
    with pytest.raises(ParameterError):
        lyapunov_constants(1 / 3, 1.0, 0.2)
    with pytest.raises(ParameterError):
        lyapunov_constants(0.3, 1.0, 0.25)


def test_non_positive_constants_rejected():
    # c < 0 for a stepsize just under 1/(3 L) and a tiny delta
    with pytest.raises(ConstantValidationError):
        lyapunov_constants(0.33, 1.0, 0.01)


def test_value_reduces_without_quadratic_terms(small_ridge, ring4_mixing):
    k = lyapunov_constants(0.3, 1.0)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((4, small_ridge.m))
    Y = rng.uniform(-0.5, 0.5, (4, small_ridge.m))
    Z = dense_z(ring4_mixing.W, small_ridge.m)
    expected = stacked_value(small_ridge, X) + (Z @ X.reshape(-1)) @ Y.reshape(-1)
    assert lyapunov_value(X, Y, X, X, 0.5, small_ridge, ring4_mixing, k) == pytest.approx(expected, rel=1e-12)


def test_value_matches_dense_evaluation(small_ridge, ring4_mixing):
    k = lyapunov_constants(0.3, 1.0)
    rng = np.random.default_rng(1)
    X, P, Q = (rng.standard_normal((4, small_ridge.m)) for _ in range(3))
    Y = rng.uniform(-1, 1, (4, small_ridge.m))
    Z = dense_z(ring4_mixing.W, small_ridge.m)
    x = X.reshape(-1)
    expected = (
        stacked_value(small_ridge, X)
        + (Z @ x) @ Y.reshape(-1)
        - k.a * np.sum((x - P.reshape(-1)) ** 2)
        + k.b * np.sum((x - Q.reshape(-1)) ** 2)
    )
    assert lyapunov_value(X, Y, P, Q, 1.0, small_ridge, ring4_mixing, k) == pytest.approx(expected, rel=1e-10)


def test_consensual_point_drops_inner_product(small_ridge, ring4_mixing):
    k = lyapunov_constants(0.3, 1.0)
    X = np.tile(np.arange(small_ridge.m, dtype=float), (4, 1))
    Y = np.full_like(X, 0.7)
    P, Q = X + 0.1, X - 0.2
    expected = stacked_value(small_ridge, X) + k.b * np.sum((X - Q) ** 2) - k.a * np.sum((X - P) ** 2)
    assert lyapunov_value(X, Y, P, Q, 1.0, small_ridge, ring4_mixing, k) == pytest.approx(expected, rel=1e-12)


def test_infeasible_dual_is_minus_infinity(small_ridge, ring4_mixing):
    X = np.zeros((4, small_ridge.m))
    Y = np.full_like(X, 2.0)
    assert lyapunov_value(X, Y, X, X, 1.0, small_ridge, ring4_mixing, lyapunov_constants(0.3, 1.0)) == -np.inf


def test_critical_point_residual_at_saddle(small_ridge, ring4_mixing):
    x_star = centralized_oracle(small_ridge).x_star
    Y = saddle_duals(small_ridge, ring4_mixing, x_star)
    rho = float(np.abs(Y).max()) + 1.0
    k = lyapunov_constants(0.3 / small_ridge.L_max, small_ridge.L_max)
    X = np.tile(x_star, (4, 1))
    assert critical_point_residual(X, Y, rho, small_ridge, ring4_mixing, k) <= 1e-9
    assert critical_point_residual(X + 0.1, Y, rho, small_ridge, ring4_mixing, k) > 1e-3


def test_stationary_trace_has_zero_margins(small_ridge, ring4_mixing):
    X = np.ones((4, small_ridge.m))
    Y = np.zeros_like(X)
    trace = InnerTrace(rho=1.0, xs=[X] * 5, ys=[Y] * 5)
    margins = lyapunov_descent_check(trace, small_ridge, ring4_mixing, lyapunov_constants(0.3, 1.0))
    assert margins == [0.0, 0.0, 0.0]


def test_short_trace_rejected(small_ridge, ring4_mixing):
    X = np.zeros((4, small_ridge.m))
    with pytest.raises(ParameterError):
        lyapunov_descent_check(InnerTrace(1.0, [X, X], [X, X]), small_ridge, ring4_mixing, lyapunov_constants(0.3, 1.0))


def _inner_trace(problem, mixing, rho, steps, iterations):
    states = [AgentState.zeros(problem.m) for _ in range(problem.n)]
    recorder = TraceRecorder(rho, states)
    rule = StoppingRule(mode="strict", eps=1e-300, rho_max=rho, hybrid=HybridParams())
    inner_loop(states, problem, mixing, rho, steps, rule, iterations, sink=recorder)
    return recorder.trace


@pytest.fixture
def ring20_ridge():
    problem, _ = generate_dataset("ridge", n=20, d_i=30, m=5, seed=13)
    return problem


@pytest.fixture
def ring20_saddle(ring20_ridge, ring20_mixing):
    x_star = centralized_oracle(ring20_ridge).x_star
    Y = saddle_duals(ring20_ridge, ring20_mixing, x_star)
    return np.tile(x_star, (20, 1)), Y


@pytest.fixture
def ring20_trace(ring20_ridge, ring20_mixing, ring20_saddle):
    # penalty above the dual bound so the consensual optimum is a saddle point
    rho = float(np.abs(ring20_saddle[1]).max()) + 1.0
    steps = default_stepsizes(ring20_ridge.L_max, validate_mixing(ring20_mixing))
    trace = _inner_trace(ring20_ridge, ring20_mixing, rho, steps, 200)
    constants = lyapunov_constants(steps.alpha, ring20_ridge.L_max, 0.2)
    return ring20_ridge, trace, constants, steps


def test_lagrangian_margins_are_reported_per_step(ring20_trace, ring20_mixing):
    problem, trace, constants, _ = ring20_trace
    assert len(trace) == 201
    margins = lyapunov_descent_check(trace, problem, ring20_mixing, constants)
    assert len(margins) == len(trace) - 2
    psi0 = lyapunov_value(*trace.point(0), trace.rho, problem, ring20_mixing, constants)
    psi_last = lyapunov_value(*trace.point(len(trace) - 2), trace.rho, problem, ring20_mixing, constants)
    assert sum(margins) <= psi0 - psi_last + 1e-9 * abs(psi0)


def test_saddle_distance_decreases_along_inner_loop(ring20_trace, ring20_mixing, ring20_saddle):
    problem, trace, _, steps = ring20_trace
    X_star, Y_star = ring20_saddle
    margins = saddle_distance_margins(trace, X_star, Y_star, problem, ring20_mixing, steps.alpha, steps.sigma)
    assert len(margins) == len(trace) - 2
    e0 = metric_norm_sq(trace.xs[0] - X_star, trace.ys[1] - Y_star, ring20_mixing, steps.alpha, steps.sigma)
    assert e0 > 0
    assert min(margins) >= -1e-9 * (1.0 + e0)


def test_step_lengths_shrink_with_reduced_dual_step(ring20_ridge, ring20_mixing):
    steps = default_stepsizes(ring20_ridge.L_max, validate_mixing(ring20_mixing), sigma_fraction=0.8)
    trace = _inner_trace(ring20_ridge, ring20_mixing, 1.0, steps, 150)
    margins = step_length_margins(trace, ring20_ridge, ring20_mixing, steps.alpha, steps.sigma)
    r0 = metric_norm_sq(trace.xs[1] - trace.xs[0], trace.ys[2] - trace.ys[1], ring20_mixing, steps.alpha, steps.sigma)
    assert len(margins) == len(trace) - 3
    assert min(margins) >= -1e-9 * (1.0 + r0)


def test_step_length_check_needs_cocoercive_slack(ring20_trace, ring20_mixing):
    problem, trace, _, steps = ring20_trace
    # default dual step: 1/alpha - sigma kappa^2 = L / 3 < L / 2
    with pytest.raises(ConstantValidationError):
        step_length_margins(trace, problem, ring20_mixing, steps.alpha, steps.sigma)


def test_metric_norm_matches_dense(ring4_mixing):
    rng = np.random.default_rng(4)
    dx, dy = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
    alpha, sigma = 0.2, 1.5
    Z = dense_z(ring4_mixing.W, 3)
    M = np.block([[np.eye(12) / alpha, -Z.T], [-Z, np.eye(12) / sigma]])
    w = np.concatenate([dx.reshape(-1), dy.reshape(-1)])
    assert metric_norm_sq(dx, dy, ring4_mixing, alpha, sigma) == pytest.approx(w @ M @ w, rel=1e-12)


def test_metric_must_be_positive_definite(ring20_trace, ring20_mixing, ring20_saddle):
    problem, trace, _, steps = ring20_trace
    sigma = 1.01 / (steps.alpha * ring20_mixing.kappa_z**2)
    with pytest.raises(ParameterError):
        saddle_distance_margins(trace, *ring20_saddle, problem, ring20_mixing, steps.alpha, sigma)


def test_subgradient_ratios_bounded(ring20_trace, ring20_mixing):
    problem, trace, constants, _ = ring20_trace
    ratios = subgradient_ratios(trace, problem, ring20_mixing, constants)
    assert ratios
    assert all(np.isfinite(r) and r < 1e4 for r in ratios)
