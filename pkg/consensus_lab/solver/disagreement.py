"""
Neighbor-local applications of the disagreement operator Z = (I - W) kron I_m.

Z is never materialized here: agent i only reads its own block and the blocks of its
neighbors. Since W is symmetric, Z^T = Z and the adjoint residual uses the same stencil.
"""
from __future__ import annotations

import numpy as np

from consensus_lab.core.errors import ParameterError
from consensus_lab.network.mixing import MixingMatrix


class StackedPrimal:
    """n blocks of dimension m, read block by block."""

    def __init__(self, blocks):
        arr = np.array(blocks, dtype=float)
        if arr.ndim == 1:
            # m = 1: one scalar per agent
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ParameterError(f"stacked vector must be (n, m), got shape {arr.shape}")
        self._blocks = arr

    @property
    def n(self) -> int:
        return self._blocks.shape[0]

    @property
    def m(self) -> int:
        return self._blocks.shape[1]

    def block(self, i: int) -> np.ndarray:
        return self._blocks[i]

    def as_array(self) -> np.ndarray:
        return self._blocks.copy()


class StackedDual(StackedPrimal):
    def __init__(self, blocks, box_radius: float = np.inf):
        super().__init__(blocks)
        self.box_radius = float(box_radius)

    def feasible(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self._blocks) <= self.box_radius + tol))


def _check(x: StackedPrimal, mixing: MixingMatrix) -> None:
    if x.n != mixing.n:
        raise ParameterError(f"stacked vector has {x.n} blocks, network has {mixing.n} agents")


def _edge_sum(x: StackedPrimal, weights, neighbors, i: int) -> np.ndarray:
    # sum of w (x_i - x_j): exactly zero whenever the neighborhood agrees
    xi = x.block(i)
    out = np.zeros_like(xi)
    for j in neighbors:
        out = out + weights[j] * (xi - x.block(j))
    return out


def row_residual(x: StackedPrimal, mixing: MixingMatrix, i: int) -> np.ndarray:
    """
    u_i = (1 - w_ii) x_i - sum_{j in N_i} w_ij x_j, evaluated as sum_{j in N_i} w_ij (x_i - x_j).

    The two forms agree because W is row-stochastic.
    """
    _check(x, mixing)
    return _edge_sum(x, mixing.W[i], mixing.neighbors(i), i)


def adjoint_residual(y: StackedDual, mixing: MixingMatrix, i: int) -> np.ndarray:
    """v_i = (1 - w_ii) y_i - sum_{j in N_i} w_ji y_j = sum_{j in N_i} w_ji (y_i - y_j) (W column-stochastic)."""
    _check(y, mixing)
    return _edge_sum(y, mixing.W[:, i], mixing.neighbors(i), i)


def apply_z(x: StackedPrimal, mixing: MixingMatrix) -> np.ndarray:
    """All row residuals stacked as an (n, m) array."""
    return np.stack([row_residual(x, mixing, i) for i in range(mixing.n)])


def apply_zt(y: StackedDual, mixing: MixingMatrix) -> np.ndarray:
    return np.stack([adjoint_residual(y, mixing, i) for i in range(mixing.n)])


def penalty_value(x: StackedPrimal, mixing: MixingMatrix, rho: float) -> float:
    """rho * ||Z x||_1."""
    if rho < 0:
        raise ParameterError("penalty weight must be nonnegative")
    if rho == 0:
        return 0.0
    return rho * float(sum(np.abs(row_residual(x, mixing, i)).sum() for i in range(mixing.n)))


def penalty_subgradient(x: StackedPrimal, mixing: MixingMatrix) -> np.ndarray:
    """
    Z^T sign(Z x) with sign(0) = 0, computed as
    g_i = (1 - w_ii) sign(u_i) - sum_{r: i in N_r} w_ri sign(u_r).
    """
    signs = StackedDual(np.sign(apply_z(x, mixing)))
    return apply_zt(signs, mixing)
