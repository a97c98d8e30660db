import numpy as np

from consensus_lab.objectives.problem import Problem, Shard, stacked_gradient


def single_agent_problem(A, b, kind="ridge", **kw) -> Problem:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return Problem(kind=kind, shards=(Shard(A, np.atleast_1d(np.asarray(b, dtype=float))),), m=A.shape[1], **kw)


def dense_z(W: np.ndarray, m: int) -> np.ndarray:
    """(I - W) kron I_m, materialized."""
    return np.kron(np.eye(W.shape[0]) - W, np.eye(m))


def saddle_duals(problem: Problem, mixing, x_star: np.ndarray) -> np.ndarray:
    """y with Z^T y = -grad F(1 x*); solvable because the local gradients at x* sum to zero."""
    n, m = problem.n, problem.m
    G = stacked_gradient(problem, np.tile(x_star, (n, 1)))
    y = -np.linalg.pinv(dense_z(mixing.W, m)) @ G.reshape(-1)
    return y.reshape(n, m)
