"""
Reference decentralized algorithms on the same Problem / MixingMatrix interfaces.

  dgd_fixed        x_i <- sum_j w_ij x_j - alpha grad f_i(x_i)
  dgd_diminishing  same with alpha_k = alpha0 / sqrt(k)
  extra            x+ = (I + W) x - W~ x_prev - alpha (grad F(x) - grad F(x_prev))
  nids             x+ = W~ (2 x - x_prev - alpha (grad F(x) - grad F(x_prev)))

with W~ = (W + I) / 2. Each step is one neighbor exchange, i.e. one communication round.
"""
from __future__ import annotations

import logging
import math
import time
from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from consensus_lab.core.config import settings
from consensus_lab.core.errors import DegenerateProblemError, DivergenceError, ParameterError
from consensus_lab.diagnostics.metrics import consensus_violation, optimality_residual
from consensus_lab.network.mixing import MixingMatrix
from consensus_lab.objectives.problem import Problem, local_prox, stacked_gradient
from consensus_lab.records import RunRecord, RunSummary
from consensus_lab.solver.disagreement import StackedPrimal

logger = logging.getLogger("consensus_lab.solver.baselines")

BaselineName = Literal["dgd_fixed", "dgd_diminishing", "extra", "nids"]
Perturb = Callable[[np.ndarray], np.ndarray]
Sink = Callable[[np.ndarray, np.ndarray | None, float, int], None]

# used when no DP2G run supplies the accuracy to match
DEFAULT_CONSENSUS_TARGET = 1e-3
DEFAULT_OPTIMALITY_TARGET = 1e-3


class BaselineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    algorithm: BaselineName
    # None: the per-algorithm default from the network spectrum and L_max
    alpha0: float | None = Field(default=None, gt=0)
    round_cap: int = Field(default_factory=lambda: settings.ROUND_CAP, gt=0)
    consensus_target: float = Field(default=DEFAULT_CONSENSUS_TARGET, gt=0)
    optimality_target: float = Field(default=DEFAULT_OPTIMALITY_TARGET, gt=0)
    force_nonsmooth: bool = False


def default_alpha(algorithm: str, L_max: float, lambda_n: float) -> float:
    if not L_max > 0:
        raise DegenerateProblemError("L_max must be positive")
    if algorithm in ("dgd_fixed", "extra"):
        return 0.9 * (1.0 + lambda_n) / L_max
    if algorithm == "dgd_diminishing":
        return 2.0 * (1.0 + lambda_n) / L_max
    if algorithm == "nids":
        return 0.9 / L_max
    raise ParameterError(f"unknown baseline {algorithm!r}")


def _mix(x: StackedPrimal, mixing: MixingMatrix, i: int) -> np.ndarray:
    """sum_j w_ij x_j over the closed neighborhood of i."""
    W = mixing.W
    out = W[i, i] * x.block(i)
    for j in mixing.neighbors(i):
        out = out + W[i, j] * x.block(j)
    return out


def _mixed(x: StackedPrimal, mixing: MixingMatrix, perturb: Perturb | None) -> np.ndarray:
    rows = [_mix(x, mixing, i) for i in range(mixing.n)]
    if perturb is not None:
        rows = [perturb(r) for r in rows]
    return np.stack(rows)


def _stacked(x) -> StackedPrimal:
    return x if isinstance(x, StackedPrimal) else StackedPrimal(x)


def dgd_fixed_step(x, mixing: MixingMatrix, problem: Problem, alpha: float, *, perturb: Perturb | None = None) -> StackedPrimal:
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    x = _stacked(x)
    return StackedPrimal(_mixed(x, mixing, perturb) - alpha * stacked_gradient(problem, x.as_array()))


def dgd_diminishing_step(k: int, alpha0: float) -> float:
    """alpha_k = alpha0 / sqrt(k)."""
    if k < 1:
        raise ParameterError("iteration index starts at 1")
    return alpha0 / math.sqrt(k)


def extra_step(
    x_curr,
    x_prev,
    mixing: MixingMatrix,
    mixing_tilde: MixingMatrix,
    problem: Problem,
    alpha: float,
    *,
    perturb: Perturb | None = None,
) -> StackedPrimal:
    x_curr, x_prev = _stacked(x_curr), _stacked(x_prev)
    Xc, Xp = x_curr.as_array(), x_prev.as_array()
    mixed = Xc + _mixed(x_curr, mixing, perturb) - _mixed(x_prev, mixing_tilde, perturb)
    grad_diff = stacked_gradient(problem, Xc) - stacked_gradient(problem, Xp)
    return StackedPrimal(mixed - alpha * grad_diff)


def nids_step(
    x_curr,
    x_prev,
    grad_curr: np.ndarray,
    grad_prev: np.ndarray,
    mixing_tilde: MixingMatrix,
    alpha: float,
    *,
    perturb: Perturb | None = None,
) -> StackedPrimal:
    """
    W~ (2 x - x_prev - alpha (g - g_prev)), mixing_tilde being W~ = (W + I) / 2.
    """
    x_curr, x_prev = _stacked(x_curr), _stacked(x_prev)
    message = 2.0 * x_curr.as_array() - x_prev.as_array() - alpha * (np.asarray(grad_curr) - np.asarray(grad_prev))
    return StackedPrimal(_mixed(StackedPrimal(message), mixing_tilde, perturb))


def _targets_met(problem: Problem, X: np.ndarray, config: BaselineConfig) -> bool:
    return (
        consensus_violation(X) <= config.consensus_target
        and optimality_residual(problem, X) <= config.optimality_target
    )


def run_baseline(
    config: BaselineConfig,
    problem: Problem,
    mixing: MixingMatrix,
    sink: Sink | None = None,
    *,
    perturb: Perturb | None = None,
    seed: int = 0,
    topology: str = "",
) -> RunRecord:
    """
    Iterate from x = 0 until consensus violation and optimality residual both fall below the
    configured targets, or until the round cap.
    """
    started = time.perf_counter()
    algorithm = config.algorithm
    if problem.n != mixing.n:
        raise ParameterError(f"problem has {problem.n} agents, network has {mixing.n}")
    if problem.kind == "elastic_net" and not config.force_nonsmooth:
        logger.info("skipping %s on elastic net (smooth-only baseline)", algorithm)
        return RunRecord(
            algorithm=algorithm,
            topology=topology,
            problem=problem.kind,
            seed=seed,
            summary=RunSummary(converged=False, reason="skipped", total_rounds=0),
        )

    alpha0 = config.alpha0 or default_alpha(algorithm, problem.L_max, mixing.lambda_n)
    mixing_tilde = mixing.lazy()

    def prox(X: np.ndarray, alpha: float) -> np.ndarray:
        if problem.kind != "elastic_net":
            return X
        return np.stack([local_prox(problem, alpha, row) for row in X])

    X = np.zeros((problem.n, problem.m))
    X_prev = X.copy()
    G = stacked_gradient(problem, X)
    G_prev = G.copy()
    rounds = 0
    converged = _targets_met(problem, X, config)
    if sink is not None:
        sink(X, None, 0.0, 0)

    logger.info("%s start alpha0=%.4g round_cap=%s", algorithm, alpha0, config.round_cap)
    while not converged and rounds < config.round_cap:
        k = rounds + 1
        if algorithm == "dgd_fixed":
            alpha = alpha0
            X_new = dgd_fixed_step(X, mixing, problem, alpha, perturb=perturb).as_array()
        elif algorithm == "dgd_diminishing":
            alpha = dgd_diminishing_step(k, alpha0)
            X_new = dgd_fixed_step(X, mixing, problem, alpha, perturb=perturb).as_array()
        elif algorithm == "extra":
            alpha = alpha0
            if k == 1:
                X_new = dgd_fixed_step(X, mixing, problem, alpha, perturb=perturb).as_array()
            else:
                X_new = extra_step(X, X_prev, mixing, mixing_tilde, problem, alpha, perturb=perturb).as_array()
        else:
            alpha = alpha0
            if k == 1:
                X_new = X - alpha * G
            else:
                X_new = nids_step(X, X_prev, G, G_prev, mixing_tilde, alpha, perturb=perturb).as_array()
        X_new = prox(X_new, alpha)
        if not np.all(np.isfinite(X_new)):
            raise DivergenceError(f"{algorithm} iterate became non-finite at round {k}")

        X_prev, X = X, X_new
        G_prev, G = G, stacked_gradient(problem, X)
        rounds = k
        if sink is not None:
            sink(X, None, 0.0, rounds)
        converged = _targets_met(problem, X, config)

    if not converged:
        logger.info("%s hit the round cap (%s)", algorithm, config.round_cap)
    summary = RunSummary(
        converged=converged,
        reason="tolerance" if converged else "round_cap",
        total_rounds=rounds,
        wall_time=time.perf_counter() - started,
    )
    return RunRecord(
        algorithm=algorithm,
        topology=topology,
        problem=problem.kind,
        seed=seed,
        summary=summary,
        final_states=X.tolist(),
    )
