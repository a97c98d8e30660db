"""
Synthetic benchmark data.

Features are standard normal. Ridge and elastic-net responses are b = A x_true + eps with
eps ~ N(0, noise_sigma^2); logistic labels are sign(a^T x_true + zeta), zeta ~ N(0, 0.5^2).
Every generated problem is rescaled so that max_i L_i <= 1.
"""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from consensus_lab.core.errors import ParameterError
from consensus_lab.objectives.problem import GroundTruth, Problem, ProblemKind, Shard

logger = logging.getLogger("consensus_lab.objectives.generate")

DEFAULT_NOISE_SIGMA = 0.1
LABEL_NOISE_SIGMA = 0.5
DEFAULT_SPARSITY = 15


def generate_dataset(
    kind: ProblemKind,
    n: int,
    d_i: int,
    m: int,
    seed=None,
    sparsity: int | None = None,
    *,
    lam: float = 1e-2,
    lam1: float = 5e-3,
    lam2: float = 1e-2,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
) -> tuple[Problem, GroundTruth]:
    if n < 1 or d_i < 1 or m < 1:
        raise ParameterError("n, d_i and m must all be >= 1")
    if sparsity is None and kind == "elastic_net":
        sparsity = min(DEFAULT_SPARSITY, m)
    if sparsity is not None and not (0 <= sparsity <= m):
        raise ParameterError(f"sparsity {sparsity} exceeds dimension m={m}")

    rng = np.random.default_rng(seed)
    if sparsity is None:
        x_true = rng.standard_normal(m)
        support = tuple(range(m))
    else:
        support = tuple(sorted(int(j) for j in rng.choice(m, size=sparsity, replace=False)))
        x_true = np.zeros(m)
        x_true[list(support)] = rng.standard_normal(sparsity)

    shards = []
    for _ in range(n):
        A = rng.standard_normal((d_i, m))
        if kind == "logistic":
            b = np.sign(A @ x_true + LABEL_NOISE_SIGMA * rng.standard_normal(d_i))
            b[b == 0.0] = 1.0
        else:
            b = A @ x_true + noise_sigma * rng.standard_normal(d_i)
        shards.append(Shard(A, b))

    problem = Problem(
        kind=kind,
        shards=tuple(shards),
        m=m,
        lam=lam if kind == "ridge" else 0.0,
        lam1=lam1 if kind == "elastic_net" else 0.0,
        lam2=lam2 if kind == "elastic_net" else 0.0,
    )
    truth = GroundTruth(x_true=x_true, support=support, noise_sigma=noise_sigma if kind != "logistic" else LABEL_NOISE_SIGMA)
    logger.debug("generated %s dataset n=%s d_i=%s m=%s", kind, n, d_i, m)
    return scale_to_unit_lipschitz(problem), truth


def scale_to_unit_lipschitz(p: Problem) -> Problem:
    L_max = p.L_max
    if L_max <= 1.0:
        return p
    return dataclasses.replace(p, scale=p.scale / L_max)
