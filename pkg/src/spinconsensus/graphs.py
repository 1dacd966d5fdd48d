"""Interaction topologies: fixed graphs and per-step binomial random graphs.

Nodes are the integers 0..N-1. Edges are unordered pairs stored canonically
as (min, max) tuples; graphs are simple (no self loops, no parallel edges)
and undirected. Sampled graphs may contain isolated nodes, whose
neighborhood is just the node itself.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, product
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Graph",
    "Neighborhood",
    "FixedGraphSpec",
    "BinomialGraphSpec",
    "GraphProcessSpec",
    "make_ring",
    "make_path",
    "make_complete",
    "make_lattice",
    "from_edge_list",
    "parse_edge_list",
    "load_edge_list",
    "format_edge_list",
    "is_connected",
    "max_neighborhood_size",
    "neighborhood",
    "sample_binomial_graph",
    "build_process_spec",
    "spec_n_nodes",
]

Edge = tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes 0..n_nodes-1."""

    n_nodes: int
    edges: frozenset[Edge]

    def __post_init__(self) -> None:
        if self.n_nodes < 2:
            raise ValueError(f"a graph needs at least 2 nodes, got {self.n_nodes}")
        bad: list[tuple] = []
        canonical: set[Edge] = set()
        for pair in self.edges:
            pair = tuple(pair)
            if len(pair) != 2:
                bad.append(pair)
                continue
            i, j = int(pair[0]), int(pair[1])
            if i == j or not (0 <= i < self.n_nodes) or not (0 <= j < self.n_nodes):
                bad.append((i, j))
            else:
                canonical.add((min(i, j), max(i, j)))
        if bad:
            raise ValueError(
                "invalid edges (self loops, out-of-range nodes, or malformed "
                f"pairs): {sorted(bad)}"
            )
        object.__setattr__(self, "edges", frozenset(canonical))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbor_lists(self) -> tuple[tuple[int, ...], ...]:
        """Sorted neighbors of every node, the node itself excluded."""
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbor_lists], dtype=np.int64)

    @cached_property
    def adjacency_matrix(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix as read-only float64."""
        a = np.zeros((self.n_nodes, self.n_nodes))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        a.setflags(write=False)
        return a


@dataclass(frozen=True)
class Neighborhood:
    """A node together with all adjacent nodes (radius 1, self included)."""

    center: int
    members: frozenset[int]


@dataclass(frozen=True)
class FixedGraphSpec:
    """Use the same graph at every time step."""

    graph: Graph


@dataclass(frozen=True)
class BinomialGraphSpec:
    """Resample a binomial random graph independently at every time step.

    Each of the n_nodes*(n_nodes-1)/2 candidate edges is present with
    probability edge_prob; edge_prob = 1/2 is the fair-coin random graph.
    """

    n_nodes: int
    edge_prob: float

    def __post_init__(self) -> None:
        if self.n_nodes < 2:
            raise ValueError(f"a graph needs at least 2 nodes, got {self.n_nodes}")
        if not 0.0 < self.edge_prob < 1.0:
            raise ValueError(
                "edge probability must lie strictly between 0 and 1, got "
                f"{self.edge_prob}"
            )


GraphProcessSpec = Union[FixedGraphSpec, BinomialGraphSpec]


def spec_n_nodes(spec: GraphProcessSpec) -> int:
    if isinstance(spec, FixedGraphSpec):
        return spec.graph.n_nodes
    return spec.n_nodes


def make_ring(n: int) -> Graph:
    """Cycle graph: node i touches (i-1) mod n and (i+1) mod n.

    Args:
        n: node count, at least 3 (a 2-ring would duplicate its edge).
    """
    if n < 3:
        raise ValueError(f"a ring needs at least 3 nodes, got {n}")
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def make_path(n: int) -> Graph:
    """Path graph 0-1-...-(n-1)."""
    if n < 2:
        raise ValueError(f"a path needs at least 2 nodes, got {n}")
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def make_complete(n: int) -> Graph:
    """Complete graph: every pair of distinct nodes is connected."""
    if n < 2:
        raise ValueError(f"a complete graph needs at least 2 nodes, got {n}")
    return Graph(n, frozenset(combinations(range(n), 2)))


def make_lattice(dims: Sequence[int], periodic: bool = False) -> Graph:
    """Grid graph of arbitrary dimension connecting orthogonal neighbors.

    Nodes are indexed in row-major order over the grid coordinates. With
    periodic=True each axis of length > 1 additionally wraps around.

    Args:
        dims: side lengths per axis, all positive; total size must be >= 2.
        periodic: wrap each axis into a torus.
    """
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"lattice dimensions must be positive integers, got {dims}")
    n = math.prod(dims)
    if n < 2:
        raise ValueError(f"a lattice needs at least 2 nodes in total, got {dims}")

    def flat(coords: tuple[int, ...]) -> int:
        idx = 0
        for c, d in zip(coords, dims):
            idx = idx * d + c
        return idx

    edges: set[Edge] = set()
    for coords in product(*(range(d) for d in dims)):
        here = flat(coords)
        for axis, d in enumerate(dims):
            c = coords[axis]
            if c + 1 < d:
                there = flat(coords[:axis] + (c + 1,) + coords[axis + 1 :])
                edges.add((here, there))
            elif periodic and d > 1:
                there = flat(coords[:axis] + (0,) + coords[axis + 1 :])
                if there != here:
                    edges.add((min(here, there), max(here, there)))
    return Graph(n, frozenset(edges))


def from_edge_list(n: int, edges: Iterable[Sequence[int]]) -> Graph:
    """Build a graph from explicit edges, rejecting malformed pairs."""
    return Graph(n, frozenset(tuple(e) for e in edges))


def parse_edge_list(text: str) -> Graph:
    """Parse the plain-text edge-list format.

    Line 1 holds the node count N; every following non-blank line holds one
    whitespace-separated pair "i j" of 0-based node indices.

    Raises:
        ValueError: listing every offending line by number.
    """
    lines = text.splitlines()
    problems: list[str] = []
    n: int | None = None
    if not lines or not lines[0].strip():
        raise ValueError("invalid edge list:\nline 1: expected the node count")
    head = lines[0].split()
    if len(head) != 1 or not _is_int(head[0]):
        problems.append(f"line 1: expected a single integer node count, got {lines[0]!r}")
    else:
        n = int(head[0])
        if n < 2:
            problems.append(f"line 1: node count must be at least 2, got {n}")
            n = None

    edges: list[Edge] = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 2 or not all(_is_int(t) for t in tokens):
            problems.append(f"line {lineno}: expected two integers 'i j', got {line!r}")
            continue
        i, j = int(tokens[0]), int(tokens[1])
        if i == j:
            problems.append(f"line {lineno}: self loop ({i}, {j})")
        elif n is not None and not (0 <= i < n and 0 <= j < n):
            problems.append(f"line {lineno}: node index out of range 0..{n - 1}: ({i}, {j})")
        else:
            edges.append((i, j))
    if problems:
        raise ValueError("invalid edge list:\n" + "\n".join(problems))
    assert n is not None
    return Graph(n, frozenset(edges))


def load_edge_list(path: str | Path) -> Graph:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))


def format_edge_list(graph: Graph) -> str:
    """Serialize a graph in the edge-list text format (sorted, round-trips)."""
    lines = [str(graph.n_nodes)]
    lines.extend(f"{i} {j}" for i, j in sorted(graph.edges))
    return "\n".join(lines) + "\n"


def _is_int(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True


def is_connected(graph: Graph) -> bool:
    """True iff a traversal from node 0 reaches every node."""
    seen = bytearray(graph.n_nodes)
    seen[0] = 1
    queue = deque([0])
    count = 1
    while queue:
        i = queue.popleft()
        for j in graph.neighbor_lists[i]:
            if not seen[j]:
                seen[j] = 1
                count += 1
                queue.append(j)
    return count == graph.n_nodes


def max_neighborhood_size(graph: Graph) -> int:
    """Largest neighborhood size over all nodes: 1 + max degree."""
    return int(1 + graph.degrees.max())


def neighborhood(graph: Graph, i: int) -> Neighborhood:
    """Radius-1 neighborhood of node i, including i itself."""
    if not 0 <= i < graph.n_nodes:
        raise ValueError(f"node index {i} out of range 0..{graph.n_nodes - 1}")
    return Neighborhood(center=i, members=frozenset((i, *graph.neighbor_lists[i])))


def sample_binomial_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Draw one binomial random graph.

    Every candidate edge is evaluated in canonical (i < j) lexicographic
    order with one uniform draw each, so a given generator state always
    yields the same graph.
    """
    if n < 2:
        raise ValueError(f"a graph needs at least 2 nodes, got {n}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"edge probability must lie strictly between 0 and 1, got {p}")
    iu, ju = np.triu_indices(n, k=1)
    on = rng.random(iu.size) < p
    return Graph(n, frozenset((int(i), int(j)) for i, j in zip(iu[on], ju[on])))


def build_process_spec(
    kind: str,
    *,
    nodes: int | None = None,
    edge_prob: float | None = None,
    dims: Sequence[int] | None = None,
    periodic: bool = False,
    edges: Iterable[Sequence[int]] | None = None,
) -> GraphProcessSpec:
    """Keyword factory over every supported topology kind.

    Args:
        kind: one of ring | path | complete | lattice | edgelist | binomial.
        nodes: node count (ring, path, complete, binomial, edgelist).
        edge_prob: per-step edge probability (binomial only).
        dims: grid side lengths (lattice only).
        periodic: wrap lattice axes.
        edges: explicit edge pairs (edgelist only).
    """
    if kind == "binomial":
        if nodes is None or edge_prob is None:
            raise ValueError("binomial topology needs both a node count and an edge probability")
        return BinomialGraphSpec(n_nodes=nodes, edge_prob=edge_prob)
    if kind == "ring":
        if nodes is None:
            raise ValueError("ring topology needs a node count")
        return FixedGraphSpec(make_ring(nodes))
    if kind == "path":
        if nodes is None:
            raise ValueError("path topology needs a node count")
        return FixedGraphSpec(make_path(nodes))
    if kind == "complete":
        if nodes is None:
            raise ValueError("complete topology needs a node count")
        return FixedGraphSpec(make_complete(nodes))
    if kind == "lattice":
        if not dims:
            raise ValueError("lattice topology needs grid dimensions")
        return FixedGraphSpec(make_lattice(dims, periodic=periodic))
    if kind == "edgelist":
        if nodes is None or edges is None:
            raise ValueError("edgelist topology needs a node count and explicit edges")
        return FixedGraphSpec(from_edge_list(nodes, edges))
    raise ValueError(f"unknown topology kind {kind!r}")
