"""
Evaluation metrics on stacked iterates.

  objective_residual    |f(x_avg) - f*|
  consensus_violation   (1/n) sum_i ||x_i - x_avg||
  optimality_residual   dist(0, d f(x_avg)); ||sum_i grad f_i(x_avg)|| for smooth problems
  penalty               rho ||Z x||_1
  stationarity_bound    ||grad F(x) + Z^T y||, composite minimal-norm form for the elastic net
"""
from __future__ import annotations

import logging

import numpy as np

from consensus_lab.diagnostics.oracle import OracleResult
from consensus_lab.network.mixing import MixingMatrix
from consensus_lab.objectives.problem import (
    Problem,
    global_stationarity,
    minimal_subgradient,
    objective_value,
    stacked_gradient,
)
from consensus_lab.records import MetricsSample
from consensus_lab.solver.disagreement import StackedDual, StackedPrimal, apply_zt, penalty_value

logger = logging.getLogger("consensus_lab.diagnostics.metrics")


def _as_array(x) -> np.ndarray:
    if isinstance(x, StackedPrimal):
        return x.as_array()
    arr = np.asarray(x, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def average(x) -> np.ndarray:
    return _as_array(x).mean(axis=0)


def consensus_violation(x) -> float:
    X = _as_array(x)
    return float(np.linalg.norm(X - X.mean(axis=0), axis=1).mean())


def optimality_residual(problem: Problem, x) -> float:
    return global_stationarity(problem, average(x))


def stationarity_bound(x, y, problem: Problem, mixing: MixingMatrix) -> float:
    """Computable upper bound on dist(0, grad F(x) + d(rho ||Z.||_1)(x)) for feasible y."""
    X = _as_array(x)
    G = stacked_gradient(problem, X)
    if y is not None:
        Y = y if isinstance(y, StackedDual) else StackedDual(y)
        G = G + apply_zt(Y, mixing)
    if problem.l1:
        G = np.stack([minimal_subgradient(G[i], X[i], problem.l1) for i in range(problem.n)])
    return float(np.linalg.norm(G))


def compute_metrics(
    x,
    y,
    problem: Problem,
    mixing: MixingMatrix,
    oracle: OracleResult,
    round: int,
    rho: float = 0.0,
) -> MetricsSample:
    X = _as_array(x)
    x_avg = X.mean(axis=0)
    return MetricsSample(
        round=round,
        objective_residual=abs(objective_value(problem, x_avg) - oracle.f_star),
        consensus_violation=consensus_violation(X),
        optimality_residual=global_stationarity(problem, x_avg),
        penalty=penalty_value(StackedPrimal(X), mixing, rho),
        stationarity_bound=stationarity_bound(X, y, problem, mixing),
        rho=rho,
    )


class MetricsRecorder:
    """
    Run sink that turns every reported iterate into a MetricsSample.

    Called as recorder(x, y, rho, round); y may be None for algorithms without duals.
    """

    def __init__(self, problem: Problem, mixing: MixingMatrix, oracle: OracleResult, every: int = 1):
        self.problem = problem
        self.mixing = mixing
        self.oracle = oracle
        self.every = max(1, int(every))
        self.samples: list[MetricsSample] = []
        self._calls = 0

    def __call__(self, x, y, rho: float, round: int) -> None:
        self._calls += 1
        if (self._calls - 1) % self.every:
            return
        if self.samples and round <= self.samples[-1].round:
            logger.debug("dropping out-of-order sample at round %s", round)
            return
        self.samples.append(compute_metrics(x, y, self.problem, self.mixing, self.oracle, round, rho))

    def final(self, x, y, rho: float, round: int) -> None:
        """Record the end state regardless of the sampling stride."""
        if self.samples and round <= self.samples[-1].round:
            return
        self.samples.append(compute_metrics(x, y, self.problem, self.mixing, self.oracle, round, rho))

    @property
    def last(self) -> MetricsSample | None:
        return self.samples[-1] if self.samples else None
