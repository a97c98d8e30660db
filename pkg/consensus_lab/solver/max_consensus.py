"""
Max-consensus over a static graph: z_i <- max(z_i, max_{j in N_i} z_j).

On a finite static graph every agent holds the exact global maximum after diameter(g) rounds.
"""
from __future__ import annotations

import numpy as np

from consensus_lab.core.errors import ParameterError
from consensus_lab.network.topology import Graph

# rounds run on top of the diameter when the solver budgets a max-consensus invocation
SAFETY_ROUNDS = 2


def max_consensus(values, g: Graph, rounds: int) -> np.ndarray:
    z = np.asarray(values, dtype=float).copy()
    if z.shape != (g.n,):
        raise ParameterError(f"expected {g.n} values, got shape {z.shape}")
    if rounds < 0:
        raise ParameterError("rounds must be nonnegative")
    for _ in range(rounds):
        z = np.array([max(z[i], *(z[j] for j in g.neighbors(i))) if g.neighbors(i) else z[i] for i in range(g.n)])
    return z


def rounds_to_agreement(values, g: Graph) -> int:
    """Number of exchanges after which every agent holds max(values)."""
    target = float(np.max(values))
    z = np.asarray(values, dtype=float)
    rounds = 0
    while not np.all(z == target):
        z = max_consensus(z, g, 1)
        rounds += 1
    return rounds


def round_budget(g: Graph) -> int:
    return g.diameter + SAFETY_ROUNDS
