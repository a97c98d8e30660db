"""
Centralized reference solver for the global objective f(x) = sum_i f_i(x).

ridge        closed-form solve of the stacked normal equations
logistic     damped Newton with Armijo backtracking
elastic net  accelerated proximal gradient with backtracking and gradient-based restart; constant
             momentum from the strong convexity modulus of the smooth part
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit

from consensus_lab.core.errors import OracleError
from consensus_lab.objectives.problem import (
    Problem,
    global_stationarity,
    objective_value,
    smooth_gradient,
    soft_threshold,
)

logger = logging.getLogger("consensus_lab.diagnostics.oracle")

ORACLE_TOL = 1e-10
NEWTON_MAX_ITER = 100
PROX_GRAD_MAX_ITER = 200_000
ARMIJO = 1e-4


@dataclass(frozen=True)
class OracleResult:
    x_star: np.ndarray
    f_star: float
    stationarity: float
    iterations: int


def _global_smooth_gradient(p: Problem, x: np.ndarray) -> np.ndarray:
    return sum(smooth_gradient(p, i, x) for i in range(p.n))


def _smooth_value(p: Problem, x: np.ndarray) -> float:
    return objective_value(p, x) - p.n * p.l1 * float(np.abs(x).sum())


def _ridge(p: Problem) -> tuple[np.ndarray, int]:
    H = np.zeros((p.m, p.m))
    r = np.zeros(p.m)
    for shard in p.shards:
        H += shard.A.T @ shard.A / shard.d
        r += shard.A.T @ shard.b / shard.d
    H += p.n * p.l2 * np.eye(p.m)
    H *= p.scale
    r *= p.scale
    try:
        x = linalg.solve(H, r, assume_a="sym")
        # one step of iterative refinement
        x = x - linalg.solve(H, H @ x - r, assume_a="sym")
    except linalg.LinAlgError as exc:
        raise OracleError(f"ridge normal equations are singular: {exc}") from exc
    return x, 1


def _logistic_hessian(p: Problem, x: np.ndarray) -> np.ndarray:
    H = np.zeros((p.m, p.m))
    for shard in p.shards:
        s = expit(shard.A @ x)
        H += (shard.A.T * (s * (1.0 - s))) @ shard.A / shard.d
    return p.scale * H


def _logistic(p: Problem) -> tuple[np.ndarray, int]:
    x = np.zeros(p.m)
    f = objective_value(p, x)
    for it in range(1, NEWTON_MAX_ITER + 1):
        g = _global_smooth_gradient(p, x)
        if np.linalg.norm(g) <= ORACLE_TOL:
            return x, it
        H = _logistic_hessian(p, x)
        # tiny Levenberg shift keeps the system solvable on nearly separable shards
        H[np.diag_indices_from(H)] += 1e-12 * max(1.0, float(np.trace(H)) / p.m)
        step = -linalg.solve(H, g, assume_a="pos")
        slope = float(g @ step)
        t = 1.0
        while True:
            x_new = x + t * step
            f_new = objective_value(p, x_new)
            if f_new <= f + ARMIJO * t * slope or t < 1e-12:
                break
            t *= 0.5
        x, f = x_new, f_new
    g = _global_smooth_gradient(p, x)
    if np.linalg.norm(g) <= ORACLE_TOL:
        return x, NEWTON_MAX_ITER
    raise OracleError(f"Newton did not reach |grad| <= {ORACLE_TOL} (got {np.linalg.norm(g):.3e})")


def _elastic_net(p: Problem) -> tuple[np.ndarray, int]:
    threshold = p.n * p.l1
    L = float(p.lipschitz.sum())
    # the smooth part is mu-strongly convex; mu > 0 switches to constant momentum
    mu = float(p.strong_convexity.sum())
    x = np.zeros(p.m)
    z = x.copy()
    theta = 1.0
    for it in range(1, PROX_GRAD_MAX_ITER + 1):
        g = _global_smooth_gradient(p, z)
        fz = _smooth_value(p, z)
        while True:
            x_new = soft_threshold(z - g / L, threshold / L)
            diff = x_new - z
            if _smooth_value(p, x_new) <= fz + g @ diff + 0.5 * L * (diff @ diff) + 1e-15 * abs(fz):
                break
            L *= 2.0
        if global_stationarity(p, x_new) <= ORACLE_TOL:
            return x_new, it
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta**2))
        if mu > 0:
            q = min(mu / L, 1.0)
            momentum = (1.0 - np.sqrt(q)) / (1.0 + np.sqrt(q))
        else:
            momentum = (theta - 1.0) / theta_new
        if (z - x_new) @ (x_new - x) > 0:
            # restart momentum
            theta_new = 1.0
            z = x_new.copy()
        else:
            z = x_new + momentum * (x_new - x)
        x, theta = x_new, theta_new
    raise OracleError(
        f"proximal gradient did not reach stationarity {ORACLE_TOL} in {PROX_GRAD_MAX_ITER} iterations "
        f"(got {global_stationarity(p, x):.3e})"
    )


def centralized_oracle(problem: Problem) -> OracleResult:
    solver = {"ridge": _ridge, "logistic": _logistic, "elastic_net": _elastic_net}[problem.kind]
    x_star, iterations = solver(problem)
    stationarity = global_stationarity(problem, x_star)
    if problem.kind == "ridge" and stationarity > ORACLE_TOL * max(1.0, problem.n):
        raise OracleError(f"ridge solve left |grad f(x*)| = {stationarity:.3e}")
    f_star = objective_value(problem, x_star)
    logger.debug("oracle %s: f*=%.12g stationarity=%.3e iterations=%s", problem.kind, f_star, stationarity, iterations)
    return OracleResult(x_star=x_star, f_star=f_star, stationarity=stationarity, iterations=iterations)
