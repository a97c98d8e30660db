"""
Communication graphs.

Responsibilities:
- build ring, rows x cols grid and random geometric graphs on n agents
- guarantee the result is undirected, loop-free and connected
- expose neighbor lists and the hop diameter used to budget max-consensus rounds

Graphs are immutable once built and can be shared read-only between workers.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.spatial.distance import pdist, squareform

from consensus_lab.core.errors import ParameterError, TopologyError

logger = logging.getLogger("consensus_lab.network.topology")

TopologyKind = Literal["ring", "grid", "random_geometric"]

# Resamples allowed before a random geometric graph is declared unbuildable
RGG_MAX_RETRIES = 100


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[tuple[int, int]]
    adjacency: tuple[tuple[int, ...], ...]
    kind: str = "custom"
    # node coordinates, only known for geometric graphs
    positions: np.ndarray | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_edges(cls, n: int, edges, kind: str = "custom", positions: np.ndarray | None = None) -> "Graph":
        normalized: set[tuple[int, int]] = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ParameterError(f"self-loop on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ParameterError(f"edge ({i}, {j}) outside node range 0..{n - 1}")
            normalized.add((min(i, j), max(i, j)))
        neighbors: list[list[int]] = [[] for _ in range(n)]
        for i, j in sorted(normalized):
            neighbors[i].append(j)
            neighbors[j].append(i)
        adjacency = tuple(tuple(sorted(nb)) for nb in neighbors)
        return cls(n=n, edges=frozenset(normalized), adjacency=adjacency, kind=kind, positions=positions)

    @classmethod
    def from_networkx(cls, g: nx.Graph, kind: str = "custom", positions: np.ndarray | None = None) -> "Graph":
        return cls.from_edges(g.number_of_nodes(), g.edges(), kind=kind, positions=positions)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def is_connected(self) -> bool:
        return self.n >= 1 and nx.is_connected(self.to_networkx())

    @cached_property
    def diameter(self) -> int:
        if self.n == 1:
            return 0
        return int(nx.diameter(self.to_networkx()))


class TopologySpec(BaseModel):
    """Serializable topology descriptor, as it appears in the experiment config."""

    model_config = ConfigDict(extra="forbid")

    kind: TopologyKind = "ring"
    n: int = 20
    rows: int | None = None
    cols: int | None = None
    radius: float = 0.35
    seed: int | None = None

    @model_validator(mode="after")
    def _check_dimensions(self) -> "TopologySpec":
        if self.n < 2:
            raise ValueError("topology needs n >= 2")
        if self.kind == "grid":
            if self.rows is None and self.cols is None:
                self.rows, self.cols = _default_grid(self.n)
            elif self.rows is None or self.cols is None or self.rows * self.cols != self.n:
                raise ValueError(f"grid rows*cols must equal n={self.n}")
        if self.kind == "random_geometric" and not (0.0 < self.radius <= math.sqrt(2.0)):
            raise ValueError("radius must lie in (0, sqrt(2)]")
        return self

    @property
    def label(self) -> str:
        if self.kind == "grid":
            return f"grid{self.rows}x{self.cols}"
        if self.kind == "random_geometric":
            return "rg"
        return self.kind

    def build(self, seed=None) -> Graph:
        return build_topology(
            self.kind,
            self.n,
            seed=self.seed if seed is None else seed,
            rows=self.rows,
            cols=self.cols,
            radius=self.radius,
        )


def _default_grid(n: int) -> tuple[int, int]:
    # most square factorization, rows <= cols (20 -> 4 x 5)
    rows = int(math.isqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


def build_topology(
    kind: TopologyKind,
    n: int,
    seed=None,
    *,
    rows: int | None = None,
    cols: int | None = None,
    radius: float = 0.35,
) -> Graph:
    """
    Build a connected undirected graph on n nodes.

    kind:
      ring             - cycle 0-1-...-(n-1)-0
      grid             - rows x cols lattice, nodes numbered row-major
      random_geometric - n points uniform in the unit square, edges between points closer than
                         radius; resampled up to RGG_MAX_RETRIES times until connected
    """
    if n < 2:
        raise ParameterError("topology needs n >= 2")

    if kind == "ring":
        return Graph.from_networkx(nx.cycle_graph(n), kind="ring")

    if kind == "grid":
        if rows is None and cols is None:
            rows, cols = _default_grid(n)
        if rows is None or cols is None or rows < 1 or cols < 1 or rows * cols != n:
            raise ParameterError(f"grid dimensions {rows}x{cols} do not match n={n}")
        lattice = nx.grid_2d_graph(rows, cols)
        lattice = nx.convert_node_labels_to_integers(lattice, ordering="sorted")
        return Graph.from_networkx(lattice, kind="grid")

    if kind == "random_geometric":
        if not (0.0 < radius <= math.sqrt(2.0)):
            raise ParameterError(f"radius {radius} outside (0, sqrt(2)]")
        rng = np.random.default_rng(seed)
        for attempt in range(1, RGG_MAX_RETRIES + 1):
            points = rng.uniform(0.0, 1.0, size=(n, 2))
            close = squareform(pdist(points)) <= radius
            g = nx.Graph()
            g.add_nodes_from(range(n))
            g.add_edges_from((i, j) for i in range(n) for j in range(i + 1, n) if close[i, j])
            if nx.is_connected(g):
                logger.debug("random geometric graph connected after %s sample(s)", attempt)
                return Graph.from_networkx(g, kind="random_geometric", positions=points)
        raise TopologyError(
            f"random geometric graph (n={n}, radius={radius}) still disconnected after {RGG_MAX_RETRIES} resamples"
        )

    raise ParameterError(f"unknown topology kind {kind!r}")
