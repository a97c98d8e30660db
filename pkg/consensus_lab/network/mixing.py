"""
Mixing matrices and their spectral summary.

The Metropolis rule is the only weight constructor:
  w_ij = 1 / (1 + max(deg i, deg j)) on edges, w_ii = 1 - sum_j w_ij, zero elsewhere.
On a connected graph it is symmetric, doubly stochastic, nonnegative with positive edge
weights, and has lambda_1 = 1 (simple) and lambda_n > -1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from consensus_lab.core.errors import MixingValidationError, ParameterError
from consensus_lab.network.topology import Graph

logger = logging.getLogger("consensus_lab.network.mixing")

# entries are rationals with small denominators
MATRIX_TOL = 1e-12
# lambda_n must stay this far above -1; lambda_2 this far below 1
SPECTRAL_MARGIN = 1e-9


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    graph: Graph
    W: np.ndarray
    # descending, computed once at construction
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ParameterError(f"mixing matrix must be square, got shape {W.shape}")
        if W.shape[0] != self.graph.n:
            raise ParameterError(f"mixing matrix size {W.shape[0]} does not match graph size {self.graph.n}")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        eig = linalg.eigvalsh(0.5 * (W + W.T))[::-1].copy()
        eig.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eig)

    @property
    def n(self) -> int:
        return self.graph.n

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.graph.adjacency[i]

    def weight(self, i: int, j: int) -> float:
        return float(self.W[i, j])

    @property
    def lambda_n(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def kappa_z(self) -> float:
        return 1.0 - self.lambda_n

    def lazy(self) -> "MixingMatrix":
        """(W + I) / 2, the second matrix EXTRA and NIDS mix with."""
        return MixingMatrix(self.graph, 0.5 * (self.W + np.eye(self.n)))


@dataclass(frozen=True)
class SpectralReport:
    lambda_n: float
    lambda_2: float
    zeta: float
    spectral_gap: float
    kappa_Z: float
    diameter: int


def metropolis_weights(g: Graph) -> MixingMatrix:
    if not g.is_connected():
        raise ParameterError("Metropolis weights require a connected graph")
    W = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w = 1.0 / (1.0 + max(g.degree(i), g.degree(j)))
        W[i, j] = w
        W[j, i] = w
    W[np.diag_indices(g.n)] = 1.0 - W.sum(axis=1)
    return MixingMatrix(g, W)


def validate_mixing(mixing: MixingMatrix) -> SpectralReport:
    """
    Check the four mixing-matrix conditions and summarize the spectrum.

    1. sparsity: w_ij = 0 off the graph, w_ij > 0 on edges
    2. symmetry
    3. double stochasticity (rows and columns sum to one)
    4. lambda_1 = 1 is simple and lambda_n > -1
    """
    W, g = mixing.W, mixing.graph
    n = g.n

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if g.has_edge(i, j):
                if not W[i, j] > 0.0:
                    raise MixingValidationError("edge-weight-positive", f"w[{i},{j}] = {W[i, j]!r} on edge ({i},{j})")
            elif abs(W[i, j]) > MATRIX_TOL:
                raise MixingValidationError("sparsity", f"w[{i},{j}] = {W[i, j]!r} but ({i},{j}) is not an edge")

    asym = np.abs(W - W.T)
    if asym.max() > MATRIX_TOL:
        i, j = np.unravel_index(int(asym.argmax()), asym.shape)
        raise MixingValidationError("symmetric", f"|w[{i},{j}] - w[{j},{i}]| = {asym[i, j]:.3e}")

    row_err = np.abs(W.sum(axis=1) - 1.0)
    if row_err.max() > MATRIX_TOL:
        i = int(row_err.argmax())
        raise MixingValidationError("row-stochastic", f"row {i} sums to {W[i].sum()!r}")
    col_err = np.abs(W.sum(axis=0) - 1.0)
    if col_err.max() > MATRIX_TOL:
        j = int(col_err.argmax())
        raise MixingValidationError("column-stochastic", f"column {j} sums to {W[:, j].sum()!r}")

    eig = mixing.eigenvalues
    if abs(eig[0] - 1.0) > 1e-10:
        raise MixingValidationError("lambda_1 = 1", f"largest eigenvalue is {eig[0]!r}")
    if n > 1 and eig[1] >= 1.0 - SPECTRAL_MARGIN:
        raise MixingValidationError("lambda_1 simple", f"second eigenvalue {eig[1]!r} equals 1 (graph disconnected?)")
    if eig[-1] <= -1.0 + SPECTRAL_MARGIN:
        raise MixingValidationError("lambda_n > -1", f"smallest eigenvalue is {eig[-1]!r}")

    lambda_2 = float(eig[1]) if n > 1 else float(eig[0])
    lambda_n = float(eig[-1])
    zeta = max(abs(lambda_2), abs(lambda_n)) if n > 1 else 0.0
    report = SpectralReport(
        lambda_n=lambda_n,
        lambda_2=lambda_2,
        zeta=zeta,
        spectral_gap=1.0 - zeta,
        kappa_Z=1.0 - lambda_n,
        diameter=g.diameter,
    )
    logger.debug("mixing matrix ok: %s", report)
    return report
