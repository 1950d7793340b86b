"""Sensor-network graphs and per-step link outcomes.

A :class:`Topology` is an undirected graph over sensor nodes; link failures
are sampled per *directed* edge, per step, as independent Bernoulli trials
(a broadcast from i to j may succeed while j to i fails in the same step).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .validation import check_probability, check_positive_int, ensure_rng

__all__ = [
    "Topology",
    "LinkOutcomes",
    "build_grid",
    "sample_link_outcomes",
    "load_edge_list",
    "save_edge_list",
]


@dataclass(frozen=True)
class Topology:
    """Immutable sensor-node graph.

    Parameters
    ----------
    node_count : int
        Number of nodes; identifiers are ``0 .. node_count - 1``.
    neighbors : tuple of frozenset
        ``neighbors[i]`` is the set of nodes adjacent to node ``i``.  Must be
        symmetric and free of self-loops.
    positions : tuple of (row, col) pairs, optional
        Grid coordinates when the topology was built as a grid.
    """

    node_count: int
    neighbors: tuple
    positions: tuple | None = None
    _directed_edges: tuple = field(init=False, repr=False, compare=False)
    _edge_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("topology needs at least one node")
        if len(self.neighbors) != self.node_count:
            raise ValueError("neighbors must list one entry per node")
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                if j == i:
                    raise ValueError(f"self-loop at node {i}")
                if not 0 <= j < self.node_count:
                    raise ValueError(f"neighbor {j} of node {i} out of range")
                if i not in self.neighbors[j]:
                    raise ValueError(f"adjacency not symmetric: {i} -> {j}")
        edges = tuple(
            (src, dst)
            for src in range(self.node_count)
            for dst in sorted(self.neighbors[src])
        )
        object.__setattr__(self, "_directed_edges", edges)
        object.__setattr__(self, "_edge_index", {e: k for k, e in enumerate(edges)})

    @property
    def directed_edges(self) -> tuple:
        """All directed edges ``(src, dst)``, sorted by (src, dst)."""
        return self._directed_edges

    def edge_index(self, src: int, dst: int) -> int:
        return self._edge_index[(src, dst)]

    def degree(self, node: int) -> int:
        return len(self.neighbors[node])

    def undirected_edges(self) -> list:
        """Each undirected edge once, as (min, max) pairs."""
        return [(i, j) for (i, j) in self._directed_edges if i < j]


@dataclass(frozen=True)
class LinkOutcomes:
    """Delivery outcome of every directed edge for one step.

    ``delivered[k]`` corresponds to ``topology.directed_edges[k]``.  The two
    directions of a link are sampled independently.
    """

    topology: Topology
    delivered: np.ndarray

    def __post_init__(self):
        if self.delivered.shape != (len(self.topology.directed_edges),):
            raise ValueError("one outcome per directed edge required")

    def delivered_between(self, src: int, dst: int) -> bool:
        return bool(self.delivered[self.topology.edge_index(src, dst)])


def build_grid(rows: int, cols: int) -> Topology:
    """Rectangular grid with 4-neighborhood adjacency (no diagonals, no wrap)."""
    rows = check_positive_int("rows", rows)
    cols = check_positive_int("cols", cols)
    n = rows * cols
    neighbors = [set() for _ in range(n)]
    positions = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            positions.append((r, c))
            if r > 0:
                neighbors[i].add(i - cols)
            if r < rows - 1:
                neighbors[i].add(i + cols)
            if c > 0:
                neighbors[i].add(i - 1)
            if c < cols - 1:
                neighbors[i].add(i + 1)
    return Topology(
        node_count=n,
        neighbors=tuple(frozenset(s) for s in neighbors),
        positions=tuple(positions),
    )


def from_undirected_edges(node_count: int, edges) -> Topology:
    """Build a topology from undirected edge pairs (each pair listed once)."""
    neighbors = [set() for _ in range(node_count)]
    for a, b in edges:
        if not (0 <= a < node_count and 0 <= b < node_count):
            raise ValueError(f"edge ({a}, {b}) out of range for {node_count} nodes")
        if a == b:
            raise ValueError(f"self-loop ({a}, {b}) not allowed")
        neighbors[a].add(b)
        neighbors[b].add(a)
    return Topology(node_count=node_count, neighbors=tuple(frozenset(s) for s in neighbors))


def sample_link_outcomes(topology: Topology, quality: float, rng=None) -> LinkOutcomes:
    """Sample one step of link outcomes: each directed edge delivers with
    probability ``quality``, independently of everything else."""
    quality = check_probability("quality", quality)
    rng = ensure_rng(rng)
    n_edges = len(topology.directed_edges)
    delivered = rng.random(n_edges) < quality
    return LinkOutcomes(topology=topology, delivered=delivered)


def load_edge_list(path) -> Topology:
    """Read an undirected edge-list file: one ``src dst`` pair per line.

    Blank lines and lines starting with ``#`` are skipped.  Node count is
    ``max id + 1``.
    """
    edges = []
    max_id = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'src dst', got {stripped!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer node id") from exc
            if a < 0 or b < 0:
                raise DataError(f"{path}:{lineno}: negative node id")
            if a == b:
                raise DataError(f"{path}:{lineno}: self-loop {a} {b}")
            edges.append((a, b))
            max_id = max(max_id, a, b)
    if max_id < 0:
        raise DataError(f"{path}: no edges found")
    return from_undirected_edges(max_id + 1, edges)


def save_edge_list(topology: Topology, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in topology.undirected_edges():
            fh.write(f"{a} {b}\n")
