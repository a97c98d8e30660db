"""
Two-layer DP2G: l1 penalty continuation around a primal-dual proximal-gradient inner loop.

Inner loop, fixed rho_k, per agent i and iteration t:
  exchange x_bar          u_bar_i = (Z x_bar)_i
  dual step               y_i <- clip(y_i + sigma * u_bar_i, -rho_k, rho_k)
  exchange y              v_i = (Z^T y)_i
  primal step             x_i <- prox(x_i - alpha * (grad f_i(x_i) + v_i))
  extrapolation           x_bar_i <- 2 x_i - x_i_prev

Outer loop: warm start, penalty update rho <- min(beta * rho, rho_max), terminate once
  (i)   max_i ||u_i||_1 <= delta_k, verified by max-consensus,
  (ii)  the last inner loop met its stopping rule,
  (iii) ||x_avg^{k+1} - x_avg^k|| <= 1e-3 * delta_k.

Communication accounting: 2 rounds per inner iteration plus 1 outer x-exchange. Max-consensus
rounds are counted separately.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Literal, Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from consensus_lab.core.config import settings
from consensus_lab.core.errors import DegenerateProblemError, DivergenceError, ParameterError
from consensus_lab.network.mixing import MixingMatrix, SpectralReport
from consensus_lab.objectives.problem import Problem, local_prox, local_stationarity, smooth_gradient
from consensus_lab.records import OuterStep, RunRecord, RunSummary
from consensus_lab.solver.disagreement import StackedDual, StackedPrimal, adjoint_residual, row_residual
from consensus_lab.solver.max_consensus import max_consensus, round_budget

logger = logging.getLogger("consensus_lab.solver.dp2g")

StoppingMode = Literal["strict", "hybrid"]
Perturb = Callable[[np.ndarray], np.ndarray]

ALPHA_FACTOR = 0.3
DEFAULT_SIGMA_FRACTION = 0.9
ELASTIC_NET_SIGMA_FRACTION = 0.8


class HybridParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eps_abs: float = Field(default=1e-4, gt=0)
    eps_rel: float = Field(default=0.02, ge=0)
    beta_pen: float = Field(default=2.0, ge=0)


class Schedules(BaseModel):
    """Penalty schedule, tolerance sequences and hybrid stopping parameters."""

    model_config = ConfigDict(extra="forbid")

    rho0: float = 1e-2
    beta: float = 1.2
    rho_max: float = 1e2
    eps0: float = Field(default=0.1, gt=0)
    delta0: float = Field(default=0.1, gt=0)
    tolerance_rule: Literal["polynomial", "exponential"] = "polynomial"
    # polynomial: eps0 / k**eta1, delta0 / k**eta2
    eta1: float = Field(default=1.0, gt=0)
    eta2: float = Field(default=2.0, gt=0)
    # exponential: eps0 * theta1**k, delta0 * theta2**k
    theta1: float = Field(default=0.9, gt=0, lt=1)
    theta2: float = Field(default=0.8, gt=0, lt=1)
    hybrid: HybridParams = Field(default_factory=HybridParams)
    quorum: float = Field(default=0.95, gt=0, le=1)
    worst_case_slack: float = Field(default=10.0, ge=1)

    @model_validator(mode="after")
    def _check_penalty(self) -> "Schedules":
        if not self.beta > 1:
            raise ValueError("growth factor beta must be > 1")
        if not (0 < self.rho0 <= self.rho_max < math.inf):
            raise ValueError("need 0 < rho0 <= rho_max < inf")
        return self

    def eps(self, k: int) -> float:
        if self.tolerance_rule == "exponential":
            return self.eps0 * self.theta1**k
        return self.eps0 / k**self.eta1

    def delta(self, k: int) -> float:
        if self.tolerance_rule == "exponential":
            return self.delta0 * self.theta2**k
        return self.delta0 / k**self.eta2


class Termination(BaseModel):
    model_config = ConfigDict(extra="forbid")

    round_cap: int = Field(default_factory=lambda: settings.ROUND_CAP, gt=0)
    inner_iteration_cap: int = Field(default_factory=lambda: settings.INNER_ITERATION_CAP, gt=0)
    stopping: StoppingMode = "hybrid"
    stabilization: float = Field(default=1e-3, gt=0)


@dataclass(frozen=True)
class StepSizes:
    alpha: float
    sigma: float

    def check(self, L_max: float, kappa_z: float) -> None:
        """Enforce 0 < alpha < 1/(3 L_max) and 0 < sigma < 1/(alpha kappa_Z^2)."""
        if not (0 < self.alpha < 1.0 / (3.0 * L_max)):
            raise ParameterError(f"alpha={self.alpha} violates 0 < alpha < 1/(3 L_max) = {1.0 / (3.0 * L_max)}")
        sigma_bound = math.inf if kappa_z == 0 else 1.0 / (self.alpha * kappa_z**2)
        if not (0 < self.sigma < sigma_bound):
            raise ParameterError(f"sigma={self.sigma} violates 0 < sigma < 1/(alpha kappa_Z^2)")


@dataclass
class AgentState:
    x: np.ndarray
    y: np.ndarray
    x_bar: np.ndarray
    x_prev: np.ndarray
    # cached smooth gradient at x
    grad: np.ndarray | None = None
    # most recent adjoint residual (Z^T y)_i
    v: np.ndarray | None = None

    @classmethod
    def zeros(cls, m: int) -> "AgentState":
        return cls(x=np.zeros(m), y=np.zeros(m), x_bar=np.zeros(m), x_prev=np.zeros(m))


@dataclass(frozen=True)
class StoppingRule:
    mode: StoppingMode
    eps: float
    rho_max: float
    hybrid: HybridParams
    quorum: float = 0.95
    worst_case_slack: float = 10.0

    @classmethod
    def for_outer(cls, schedules: Schedules, k: int, mode: StoppingMode) -> "StoppingRule":
        return cls(
            mode=mode,
            eps=schedules.eps(k),
            rho_max=schedules.rho_max,
            hybrid=schedules.hybrid,
            quorum=schedules.quorum,
            worst_case_slack=schedules.worst_case_slack,
        )

    def thresholds(self, rho: float, grad_norms: np.ndarray) -> np.ndarray:
        if self.mode == "strict":
            return np.full(grad_norms.shape, self.eps)
        return np.array([hybrid_threshold(rho, self.rho_max, g, self.hybrid) for g in grad_norms])

    def satisfied(self, residuals: np.ndarray, thresholds: np.ndarray) -> bool:
        if self.mode == "strict":
            return bool(np.all(residuals <= thresholds))
        under = residuals <= thresholds
        worst = float(np.max(residuals / thresholds))
        return bool(under.mean() >= self.quorum and worst <= self.worst_case_slack)


@dataclass
class InnerResult:
    iterations: int
    communication_rounds: int
    residuals: np.ndarray
    thresholds: np.ndarray
    converged: bool
    reason: Literal["quorum_met", "iteration_cap"]


class IterationSink(Protocol):
    def __call__(self, iteration: int, states: list[AgentState]) -> None: ...


def default_stepsizes(L_max: float, spectral: SpectralReport, sigma_fraction: float = DEFAULT_SIGMA_FRACTION) -> StepSizes:
    if not L_max > 0:
        raise DegenerateProblemError("L_max must be positive to set alpha = 0.3 / L_max")
    if not 0 < sigma_fraction < 1:
        raise ParameterError("sigma_fraction must lie in (0, 1)")
    alpha = ALPHA_FACTOR / L_max
    # a single agent has Z = 0 and any positive dual step is admissible
    kappa_sq = spectral.kappa_Z**2 or 1.0
    sigma = sigma_fraction / (alpha * kappa_sq)
    return StepSizes(alpha=alpha, sigma=sigma)


def dual_step(state: AgentState, u_bar: np.ndarray, sigma: float, rho: float) -> np.ndarray:
    return np.clip(state.y + sigma * u_bar, -rho, rho)


def primal_step(state: AgentState, grad: np.ndarray, v: np.ndarray, alpha: float, p: Problem) -> np.ndarray:
    x_new = local_prox(p, alpha, state.x - alpha * (grad + v))
    if not np.all(np.isfinite(x_new)):
        raise DivergenceError(f"primal iterate became non-finite (alpha={alpha}, |grad|={np.linalg.norm(grad):.3e})")
    return x_new


def extrapolate(state: AgentState) -> np.ndarray:
    return 2.0 * state.x - state.x_prev


def hybrid_threshold(rho: float, rho_max: float, grad_norm: float, params: HybridParams | None = None) -> float:
    """tau = max(eps_abs, eps_rel * |grad|) * (1 + beta_pen * (1 - rho / rho_max)^2)."""
    params = params or HybridParams()
    if not (0 <= rho <= rho_max):
        raise ParameterError(f"rho={rho} outside [0, rho_max={rho_max}]")
    base = max(params.eps_abs, params.eps_rel * grad_norm)
    return base * (1.0 + params.beta_pen * (1.0 - rho / rho_max) ** 2)


def penalty_update(rho: float, beta: float, rho_max: float) -> float:
    return min(beta * rho, rho_max)


def updates_to_cap(rho0: float, beta: float, rho_max: float) -> int:
    """Number of penalty updates after which rho == rho_max."""
    if rho0 >= rho_max:
        return 0
    return math.ceil(math.log(rho_max / rho0) / math.log(beta))


def stack_x(states: list[AgentState]) -> np.ndarray:
    return np.stack([s.x for s in states])


def stack_y(states: list[AgentState]) -> np.ndarray:
    return np.stack([s.y for s in states])


def warm_start(states: list[AgentState], p: Problem) -> None:
    """Inner-loop entry: x_bar = x, and the gradient cache filled."""
    for i, s in enumerate(states):
        s.x_bar = s.x.copy()
        s.x_prev = s.x.copy()
        if s.grad is None:
            s.grad = smooth_gradient(p, i, s.x)


def inner_loop(
    states: list[AgentState],
    problem: Problem,
    mixing: MixingMatrix,
    rho: float,
    steps: StepSizes,
    stopping: StoppingRule,
    iteration_cap: int,
    *,
    perturb: Perturb | None = None,
    sink: IterationSink | None = None,
) -> InnerResult:
    n = mixing.n
    warm_start(states, problem)
    residuals = np.full(n, np.inf)
    thresholds = np.full(n, np.inf)
    t = 0
    while t < iteration_cap:
        # exchange 1: extrapolated primal
        x_bar = StackedPrimal([s.x_bar for s in states])
        for i, s in enumerate(states):
            u_bar = row_residual(x_bar, mixing, i)
            if perturb is not None:
                u_bar = perturb(u_bar)
            s.y = dual_step(s, u_bar, steps.sigma, rho)

        # exchange 2: fresh duals
        y_msg = StackedDual([perturb(s.y) if perturb is not None else s.y for s in states], box_radius=rho)
        grad_norms = np.empty(n)
        for i, s in enumerate(states):
            v = adjoint_residual(y_msg, mixing, i)
            x_new = primal_step(s, s.grad, v, steps.alpha, problem)
            s.x_prev, s.x = s.x, x_new
            s.x_bar = extrapolate(s)
            s.grad = smooth_gradient(problem, i, s.x)
            s.v = v
            residuals[i] = local_stationarity(problem, s.x, s.grad + v)
            grad_norms[i] = np.linalg.norm(s.grad)
        t += 1

        if sink is not None:
            sink(t, states)

        thresholds = stopping.thresholds(rho, grad_norms)
        if stopping.satisfied(residuals, thresholds):
            return InnerResult(t, 2 * t, residuals.copy(), thresholds, True, "quorum_met")

    return InnerResult(t, 2 * t, residuals.copy(), thresholds, False, "iteration_cap")


def run(
    problem: Problem,
    mixing: MixingMatrix,
    schedules: Schedules,
    steps: StepSizes,
    termination: Termination | None = None,
    seed: int = 0,
    *,
    perturb: Perturb | None = None,
    sink: Callable[[np.ndarray, np.ndarray, float, int], None] | None = None,
    topology: str = "",
) -> RunRecord:
    """
    Full two-layer run from x_i = 0, y_i = 0.

    The iteration is deterministic; seed is recorded on the RunRecord for provenance only.
    Randomness (message noise) enters solely through perturb.

    sink, when given, is called after every inner iteration with the stacked primal and dual
    arrays, the current penalty and the cumulative communication-round count.
    """
    termination = termination or Termination()
    steps.check(problem.L_max, mixing.kappa_z)
    started = time.perf_counter()
    n, m = mixing.n, problem.m
    if problem.n != n:
        raise ParameterError(f"problem has {problem.n} agents, network has {n}")
    graph = mixing.graph
    mc_budget = round_budget(graph)

    states = [AgentState.zeros(m) for _ in range(n)]
    rho = schedules.rho0
    k = 1
    rounds = mc_rounds = inner_total = outer_count = 0
    x_avg_prev = np.zeros(m)
    outer: list[OuterStep] = []
    converged = False
    reason = "round_cap"

    logger.info("dp2g start n=%s m=%s alpha=%.4g sigma=%.4g stopping=%s", n, m, steps.alpha, steps.sigma, termination.stopping)
    while True:
        remaining = termination.round_cap - rounds
        # keep one round for the outer exchange
        cap = min(termination.inner_iteration_cap, (remaining - 1) // 2)
        if cap <= 0:
            break

        base_rounds = rounds
        inner_sink = None
        if sink is not None:
            def inner_sink(t, st, _base=base_rounds, _rho=rho):
                sink(stack_x(st), stack_y(st), _rho, _base + 2 * t)

        stopping = StoppingRule.for_outer(schedules, k, termination.stopping)
        result = inner_loop(states, problem, mixing, rho, steps, stopping, cap, perturb=perturb, sink=inner_sink)
        rounds += result.communication_rounds
        inner_total += result.iterations

        # outer exchange of the fresh primal, then max-consensus on d_i = ||u_i||_1
        X = StackedPrimal(stack_x(states))
        rounds += 1
        outer_count += 1
        d = np.array([np.abs(row_residual(X, mixing, i)).sum() for i in range(n)])
        d_max = max_consensus(d, graph, mc_budget)
        mc_rounds += mc_budget

        x_avg = X.as_array().mean(axis=0)
        shift = float(np.linalg.norm(x_avg - x_avg_prev))
        delta = schedules.delta(k)
        outer.append(
            OuterStep(
                k=k,
                rho=rho,
                eps=stopping.eps,
                delta=delta,
                inner_iterations=result.iterations,
                inner_converged=result.converged,
                max_disagreement=float(d_max[0]),
                average_shift=shift,
                rounds=rounds,
            )
        )
        logger.debug(
            "outer k=%s rho=%.4g inner=%s (%s) max_d=%.3e delta=%.3e shift=%.3e rounds=%s",
            k, rho, result.iterations, result.reason, d_max[0], delta, shift, rounds,
        )

        if bool(np.all(d_max <= delta)) and result.converged and shift <= termination.stabilization * delta:
            converged = True
            reason = "tolerance"
            break

        rho = penalty_update(rho, schedules.beta, schedules.rho_max)
        k += 1
        x_avg_prev = x_avg

    if not converged:
        logger.warning("dp2g hit the round cap (%s) without meeting the termination rule", termination.round_cap)
    summary = RunSummary(
        converged=converged,
        reason=reason,
        total_rounds=rounds,
        max_consensus_rounds=mc_rounds,
        inner_iterations=inner_total,
        outer_iterations=outer_count,
        final_rho=rho,
        wall_time=time.perf_counter() - started,
    )
    logger.info("dp2g done converged=%s rounds=%s max_consensus_rounds=%s", converged, rounds, mc_rounds)
    return RunRecord(
        algorithm="dp2g",
        topology=topology,
        problem=problem.kind,
        seed=seed,
        outer=outer,
        summary=summary,
        final_states=stack_x(states).tolist(),
        final_duals=stack_y(states).tolist(),
    )
