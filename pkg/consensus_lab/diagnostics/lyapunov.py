"""
Lyapunov diagnostics and descent certificates for the fixed-penalty inner loop.

  Psi(x, y, p, q) = F(x) + <Z x, y> - a ||x - p||^2 + b ||x - q||^2     (y in the box |y| <= rho)

evaluated along a trace at z^t = (x^t, y^t, x^{t+1}, x^{t-1}) with x^{-1} = x^0. lyapunov_descent_check
reports the per-step margin

  Psi(z^t) - Psi(z^{t+1}) - c (||x^{t+1} - x^t||^2 + ||x^t - x^{t-1}||^2)

as is. It is not sign-definite: ridge runs on a ring with rho = 1 already show small negative
margins, so it is a diagnostic only.

The certificate that does hold pairs each primal iterate with the dual it is stepped against,
w^t = (x^t, y^{t+1}), and measures it in the primal-dual metric

  ||(dx, dy)||_M^2 = ||dx||^2 / alpha - 2 <Z dx, dy> + ||dy||^2 / sigma,

positive definite whenever sigma alpha kappa_Z^2 < 1. For convex f_i the inner loop is a
forward-backward step in that metric, which gives saddle_distance_margins (always) and
step_length_margins (when 1/alpha - sigma kappa_Z^2 >= L_max / 2).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from consensus_lab.core.errors import ConstantValidationError, ParameterError
from consensus_lab.network.mixing import MixingMatrix
from consensus_lab.objectives.problem import Problem, minimal_subgradient, stacked_gradient, stacked_value
from consensus_lab.solver.disagreement import StackedDual, StackedPrimal, apply_z, apply_zt

logger = logging.getLogger("consensus_lab.diagnostics.lyapunov")

DEFAULT_DELTA = 0.2
FEASIBILITY_TOL = 1e-12
INFEASIBLE = -math.inf


@dataclass(frozen=True)
class LyapunovConstants:
    delta: float
    a: float
    b: float
    c: float


def lyapunov_constants(alpha: float, L_max: float, delta: float = DEFAULT_DELTA) -> LyapunovConstants:
    if not (0 < delta <= 0.2):
        raise ParameterError(f"delta={delta} outside (0, 1/5]")
    if not (0 < alpha < 1.0 / (3.0 * L_max)):
        raise ParameterError(f"alpha={alpha} violates 0 < alpha < 1/(3 L_max)")
    L = L_max
    a = delta / alpha
    b = (
        1.0 / (2.0 * alpha)
        - delta / alpha
        - L / 4.0
        - delta * L
        - alpha * delta * L**2 / 2.0
        + alpha * L**2 / (4.0 * delta)
    )
    c = b - alpha * L**2 / (2.0 * delta)
    if min(a, b, c) <= 0:
        raise ConstantValidationError(f"non-positive constants a={a:.4g} b={b:.4g} c={c:.4g}; stepsize too large")
    return LyapunovConstants(delta=delta, a=a, b=b, c=c)


def _arr(x) -> np.ndarray:
    if isinstance(x, StackedPrimal):
        return x.as_array()
    arr = np.asarray(x, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def lyapunov_value(x, y, p, q, rho: float, problem: Problem, mixing: MixingMatrix, constants: LyapunovConstants) -> float:
    """Psi at (x, y, p, q); -inf when y leaves the box."""
    X, Y, P, Q = _arr(x), _arr(y), _arr(p), _arr(q)
    if np.any(np.abs(Y) > rho + FEASIBILITY_TOL):
        return INFEASIBLE
    ZX = apply_z(StackedPrimal(X), mixing)
    return (
        stacked_value(problem, X)
        + float(np.sum(ZX * Y))
        - constants.a * float(np.sum((X - P) ** 2))
        + constants.b * float(np.sum((X - Q) ** 2))
    )


def lyapunov_subgradient(x, y, p, q, rho: float, problem: Problem, mixing: MixingMatrix, constants: LyapunovConstants):
    """
    Minimal-norm element of the limiting subdifferential of Psi, block by block
    (d_x, d_y, d_p, d_q). The y block is Z x reduced by the normal cone of the box at y.
    """
    X, Y, P, Q = _arr(x), _arr(y), _arr(p), _arr(q)
    a, b = constants.a, constants.b
    G = stacked_gradient(problem, X) + apply_zt(StackedDual(Y), mixing) - 2.0 * a * (X - P) + 2.0 * b * (X - Q)
    if problem.l1:
        G = np.stack([minimal_subgradient(G[i], X[i], problem.l1) for i in range(problem.n)])
    ZX = apply_z(StackedPrimal(X), mixing)
    upper = Y >= rho - FEASIBILITY_TOL
    lower = Y <= -rho + FEASIBILITY_TOL
    d_y = np.where(upper, np.minimum(ZX, 0.0), np.where(lower, np.maximum(ZX, 0.0), ZX))
    return G, d_y, 2.0 * a * (X - P), 2.0 * b * (Q - X)


def critical_point_residual(x, y, rho: float, problem: Problem, mixing: MixingMatrix, constants: LyapunovConstants) -> float:
    """||d Psi|| at p = q = x; zero exactly at saddle points of the penalized Lagrangian."""
    blocks = lyapunov_subgradient(x, y, x, x, rho, problem, mixing, constants)
    return float(np.sqrt(sum(np.sum(blk**2) for blk in blocks)))


@dataclass
class InnerTrace:
    """Primal and dual iterates x^0..x^T, y^0..y^T of one fixed-penalty inner loop."""

    rho: float
    xs: list[np.ndarray] = field(default_factory=list)
    ys: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.xs)

    def point(self, t: int):
        """z^t = (x^t, y^t, x^{t+1}, x^{t-1})."""
        return self.xs[t], self.ys[t], self.xs[t + 1], self.xs[max(t - 1, 0)]


class TraceRecorder:
    """inner_loop sink collecting an InnerTrace; seed it with the entry state first."""

    def __init__(self, rho: float, states=None):
        self.trace = InnerTrace(rho=rho)
        if states is not None:
            self._append(states)

    def _append(self, states) -> None:
        self.trace.xs.append(np.stack([s.x for s in states]))
        self.trace.ys.append(np.stack([s.y for s in states]))

    def __call__(self, iteration: int, states) -> None:
        self._append(states)


def lyapunov_descent_check(
    trace: InnerTrace,
    problem: Problem,
    mixing: MixingMatrix,
    constants: LyapunovConstants,
) -> list[float]:
    """Per-step margins; one fewer than the number of evaluable points z^0..z^{T-1}."""
    if len(trace) < 3:
        raise ParameterError("descent check needs at least three iterates")
    rho = trace.rho
    psi = [lyapunov_value(*trace.point(t), rho, problem, mixing, constants) for t in range(len(trace) - 1)]
    margins = []
    for t in range(len(psi) - 1):
        x_prev, x, x_next = trace.xs[max(t - 1, 0)], trace.xs[t], trace.xs[t + 1]
        steps = float(np.sum((x_next - x) ** 2) + np.sum((x - x_prev) ** 2))
        margins.append(psi[t] - psi[t + 1] - constants.c * steps)
    worst = min(margins)
    if worst < 0:
        logger.debug("lyapunov descent: worst margin %.3e at rho=%.4g", worst, rho)
    return margins


def subgradient_ratios(
    trace: InnerTrace,
    problem: Problem,
    mixing: MixingMatrix,
    constants: LyapunovConstants,
) -> list[float]:
    """
    ||d Psi(z^t)|| / (||x^{t+1} - x^t|| + ||x^t - x^{t-1}||) along the trace.

    Steps with a zero denominator are skipped. Bounded ratios are the empirical form of the
    relative-error condition the convergence argument relies on.
    """
    ratios = []
    for t in range(len(trace) - 1):
        x_prev, x, x_next = trace.xs[max(t - 1, 0)], trace.xs[t], trace.xs[t + 1]
        denom = float(np.linalg.norm(x_next - x) + np.linalg.norm(x - x_prev))
        if denom == 0.0:
            continue
        blocks = lyapunov_subgradient(*trace.point(t), trace.rho, problem, mixing, constants)
        ratios.append(float(np.sqrt(sum(np.sum(blk**2) for blk in blocks))) / denom)
    return ratios


def metric_norm_sq(dx, dy, mixing: MixingMatrix, alpha: float, sigma: float) -> float:
    DX, DY = _arr(dx), _arr(dy)
    ZDX = apply_z(StackedPrimal(DX), mixing)
    return float(np.sum(DX**2) / alpha - 2.0 * np.sum(ZDX * DY) + np.sum(DY**2) / sigma)


def _check_metric(mixing: MixingMatrix, alpha: float, sigma: float) -> None:
    if not (alpha > 0 and sigma > 0):
        raise ParameterError("stepsizes must be positive")
    if sigma * alpha * mixing.kappa_z**2 >= 1.0:
        raise ParameterError(f"sigma alpha kappa_Z^2 = {sigma * alpha * mixing.kappa_z**2:.4g} >= 1; metric is not positive definite")


def _paired(trace: InnerTrace) -> list[tuple[np.ndarray, np.ndarray]]:
    """w^t = (x^t, y^{t+1}) for t = 0..T-1."""
    return [(trace.xs[t], trace.ys[t + 1]) for t in range(len(trace) - 1)]


def saddle_distance_margins(
    trace: InnerTrace,
    x_star,
    y_star,
    problem: Problem,
    mixing: MixingMatrix,
    alpha: float,
    sigma: float,
) -> list[float]:
    """
    E_t - E_{t+1} - ||w^{t+1} - w^t||_M^2 + (L_max / 2) ||x^{t+1} - x^t||^2 for E_t = ||w^t - w*||_M^2.

    (x_star, y_star) must be a saddle point of the penalized Lagrangian at trace.rho, both as
    (n, m) arrays. Nonnegative for convex f_i and any stepsizes that make M positive definite.
    """
    _check_metric(mixing, alpha, sigma)
    if len(trace) < 3:
        raise ParameterError("saddle distance check needs at least three iterates")
    X_star, Y_star = _arr(x_star), _arr(y_star)
    if np.any(np.abs(Y_star) > trace.rho + FEASIBILITY_TOL):
        raise ParameterError("y_star lies outside the dual box")
    pairs = _paired(trace)
    dist = [metric_norm_sq(x - X_star, y - Y_star, mixing, alpha, sigma) for x, y in pairs]
    margins = []
    for t in range(len(pairs) - 1):
        (x0, y0), (x1, y1) = pairs[t], pairs[t + 1]
        step = metric_norm_sq(x1 - x0, y1 - y0, mixing, alpha, sigma)
        margins.append(dist[t] - dist[t + 1] - step + 0.5 * problem.L_max * float(np.sum((x1 - x0) ** 2)))
    return margins


def step_length_margins(trace: InnerTrace, problem: Problem, mixing: MixingMatrix, alpha: float, sigma: float) -> list[float]:
    """
    r_t - r_{t+1} for r_t = ||w^{t+1} - w^t||_M^2.

    The inner-loop map is nonexpansive in M once 1/alpha - sigma kappa_Z^2 >= L_max / 2, so the
    margins are nonnegative; no saddle point is needed.
    """
    _check_metric(mixing, alpha, sigma)
    slack = 1.0 / alpha - sigma * mixing.kappa_z**2 - 0.5 * problem.L_max
    if slack < 0:
        raise ConstantValidationError(f"1/alpha - sigma kappa_Z^2 falls {-slack:.4g} short of L_max / 2")
    pairs = _paired(trace)
    if len(pairs) < 3:
        raise ParameterError("step length check needs at least four iterates")
    lengths = [
        metric_norm_sq(x1 - x0, y1 - y0, mixing, alpha, sigma)
        for (x0, y0), (x1, y1) in zip(pairs, pairs[1:])
    ]
    return [a - b for a, b in zip(lengths, lengths[1:])]
