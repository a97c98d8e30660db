"""
Benchmark objectives with per-agent data shards.

  ridge        f_i(x) = s * ( ||A_i x - b_i||^2 / (2 d_i) + lam/2 ||x||^2 )
  logistic     f_i(x) = s * mean_j log(1 + exp(-b_ij a_ij^T x))
  elastic_net  f_i(x) = s * ( ||A_i x - b_i||^2 / (2 d_i) + lam2/2 ||x||^2 + lam1 ||x||_1 )

s is the uniform loss scale set by scale_to_unit_lipschitz (1.0 for raw data). Multiplying the
whole local objective keeps every minimizer in place. The lam1 ||x||_1 term of the elastic net is
never differentiated: it is handled by local_prox after the gradient step.

All evaluations are pure; a Problem is immutable and may be shared across workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import linalg
from scipy.special import expit

from consensus_lab.core.errors import NumericError, ParameterError

ProblemKind = Literal["ridge", "logistic", "elastic_net"]

# dense SVD up to this dimension, power iteration above
DENSE_SVD_MAX_DIM = 200
POWER_ITERATION_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class Shard:
    A: np.ndarray
    b: np.ndarray

    @property
    def d(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class GroundTruth:
    x_true: np.ndarray = field(compare=False)
    support: tuple[int, ...]
    noise_sigma: float


@dataclass(frozen=True, eq=False)
class Problem:
    kind: ProblemKind
    shards: tuple[Shard, ...]
    m: int
    lam: float = 0.0
    lam1: float = 0.0
    lam2: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("ridge", "logistic", "elastic_net"):
            raise ParameterError(f"unknown problem kind {self.kind!r}")
        if not self.shards:
            raise ParameterError("problem needs at least one agent shard")
        shards = []
        for i, shard in enumerate(self.shards):
            A = np.asarray(shard.A, dtype=float)
            b = np.asarray(shard.b, dtype=float).reshape(-1)
            if A.ndim != 2 or A.shape[1] != self.m or A.shape[0] != b.shape[0] or A.shape[0] < 1:
                raise ParameterError(f"shard {i}: A {A.shape} / b {b.shape} inconsistent with m={self.m}")
            if self.kind == "logistic" and not np.all(np.isin(b, (-1.0, 1.0))):
                raise ParameterError(f"shard {i}: logistic labels must be -1 or +1")
            shards.append(Shard(A, b))
        object.__setattr__(self, "shards", tuple(shards))
        if self.kind == "elastic_net" and not (self.lam1 > 0 and self.lam2 > 0):
            raise ParameterError("elastic net needs lam1 > 0 and lam2 > 0")
        if min(self.lam, self.lam1, self.lam2) < 0 or not self.scale > 0:
            raise ParameterError("regularizers must be nonnegative and scale positive")

    @property
    def n(self) -> int:
        return len(self.shards)

    @property
    def l2(self) -> float:
        """Weight of the (lam/2)||x||^2 term in the smooth part."""
        return self.lam2 if self.kind == "elastic_net" else self.lam

    @property
    def l1(self) -> float:
        """Effective l1 weight after scaling (zero unless elastic net)."""
        return self.scale * self.lam1 if self.kind == "elastic_net" else 0.0

    @cached_property
    def lipschitz(self) -> np.ndarray:
        return lipschitz_constants(self)[0]

    @property
    def L_max(self) -> float:
        return float(self.lipschitz.max())

    @cached_property
    def strong_convexity(self) -> np.ndarray:
        """Per-agent modulus from the ridge term alone (0 for logistic)."""
        return np.full(self.n, self.scale * self.l2 if self.kind != "logistic" else 0.0)


def _check_finite(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite decision vector")
    return x


def sigma_max(A: np.ndarray) -> float:
    if min(A.shape) == 0 or not np.any(A):
        return 0.0
    if A.shape[1] <= DENSE_SVD_MAX_DIM:
        return float(linalg.svdvals(A)[0])
    v = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    estimate = 0.0
    for _ in range(10_000):
        w = A.T @ (A @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= POWER_ITERATION_RTOL * norm:
            estimate = norm
            break
        estimate = norm
    return float(np.sqrt(estimate))


def lipschitz_constants(p: Problem) -> tuple[np.ndarray, float]:
    """Per-agent gradient Lipschitz constants L_i and L_max = max_i L_i."""
    L = np.empty(p.n)
    for i, shard in enumerate(p.shards):
        s2 = sigma_max(shard.A) ** 2 / shard.d
        if p.kind == "logistic":
            L[i] = p.scale * s2 / 4.0
        else:
            L[i] = p.scale * (s2 + p.l2)
    return L, float(L.max())


def smooth_gradient(p: Problem, i: int, x: np.ndarray) -> np.ndarray:
    x = _check_finite(x)
    shard = p.shards[i]
    if p.kind == "logistic":
        margins = shard.b * (shard.A @ x)
        return -p.scale * (shard.A.T @ (shard.b * expit(-margins))) / shard.d
    residual = shard.A @ x - shard.b
    return p.scale * (shard.A.T @ residual / shard.d + p.l2 * x)


def stacked_gradient(p: Problem, X: np.ndarray) -> np.ndarray:
    """Row i is the smooth gradient of agent i at X[i]."""
    return np.stack([smooth_gradient(p, i, X[i]) for i in range(p.n)])


def soft_threshold(v: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def local_prox(p: Problem, step: float, x: np.ndarray) -> np.ndarray:
    if not step > 0:
        raise ParameterError("prox step must be positive")
    if p.kind != "elastic_net":
        return np.asarray(x, dtype=float)
    return soft_threshold(np.asarray(x, dtype=float), step * p.l1)


def nonsmooth_value(p: Problem, x: np.ndarray) -> float:
    return p.l1 * float(np.abs(x).sum()) if p.kind == "elastic_net" else 0.0


def local_value(p: Problem, i: int, x: np.ndarray) -> float:
    """f_i(x) including the local nonsmooth term."""
    x = _check_finite(x)
    shard = p.shards[i]
    if p.kind == "logistic":
        return p.scale * float(np.mean(np.logaddexp(0.0, -shard.b * (shard.A @ x))))
    residual = shard.A @ x - shard.b
    smooth = residual @ residual / (2.0 * shard.d) + 0.5 * p.l2 * (x @ x)
    return p.scale * float(smooth) + nonsmooth_value(p, x)


def objective_value(p: Problem, x: np.ndarray) -> float:
    """Global f(x) = sum_i f_i(x)."""
    return float(sum(local_value(p, i, x) for i in range(p.n)))


def stacked_value(p: Problem, X: np.ndarray) -> float:
    """F(x) = sum_i f_i(x_i) for a stacked (n, m) array."""
    return float(sum(local_value(p, i, X[i]) for i in range(p.n)))


def minimal_subgradient(g: np.ndarray, x: np.ndarray, l1: float) -> np.ndarray:
    """
    Minimal-norm element of g + l1 * d||.||_1(x), componentwise.

    x_j != 0: g_j + l1 sign(x_j);  x_j == 0: soft-threshold of g_j by l1.
    """
    if l1 == 0.0:
        return g
    return np.where(x != 0.0, g + l1 * np.sign(x), soft_threshold(g, l1))


def local_stationarity(p: Problem, x: np.ndarray, g: np.ndarray) -> float:
    """dist(0, g + d(local nonsmooth term)(x)); equals ||g|| for smooth problems."""
    return float(np.linalg.norm(minimal_subgradient(g, x, p.l1)))


def global_stationarity(p: Problem, x: np.ndarray) -> float:
    """dist(0, d f(x)) for the global objective at a single point x."""
    g = sum(smooth_gradient(p, i, x) for i in range(p.n))
    return float(np.linalg.norm(minimal_subgradient(g, x, p.n * p.l1)))
