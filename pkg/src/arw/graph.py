"""Simple undirected connected graphs on vertices 0..k-1."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Raised for malformed or invalid graph input."""


@dataclass(frozen=True)
class Graph:
    """Immutable simple connected graph.

    ``adjacency[i]`` is the sorted tuple of neighbours of vertex ``i``.
    Construction validates symmetry, absence of self-loops and connectivity.
    """

    k: int
    adjacency: tuple[tuple[int, ...], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.k < 1:
            raise GraphError("graph needs at least one vertex")
        if len(self.adjacency) != self.k:
            raise GraphError("adjacency length does not match k")
        for i, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise GraphError(f"neighbour list of {i} is not sorted/unique")
            for j in nbrs:
                if j == i:
                    raise GraphError(f"self-loop at vertex {i}")
                if not 0 <= j < self.k:
                    raise GraphError(f"vertex index {j} out of range")
                if i not in self.adjacency[j]:
                    raise GraphError(f"edge ({i},{j}) is not symmetric")
        if np.any(self.distances[0] < 0):
            raise GraphError("graph is disconnected")

    @classmethod
    def from_edges(cls, k: int, edges, name: str = "") -> "Graph":
        nbrs: list[set[int]] = [set() for _ in range(k)]
        for i, j in edges:
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            if not (0 <= i < k and 0 <= j < k):
                raise GraphError(f"edge ({i},{j}) out of range for k={k}")
            nbrs[i].add(j)
            nbrs[j].add(i)
        return cls(k, tuple(tuple(sorted(s)) for s in nbrs), name)

    @cached_property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.k) for j in self.adjacency[i] if i < j]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) arrays for the hot loops."""
        indptr = np.zeros(self.k + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(self.degrees)
        indices = np.array([j for a in self.adjacency for j in a], dtype=np.int64)
        return indptr, indices

    @cached_property
    def distances(self) -> np.ndarray:
        """All-pairs BFS distances; -1 marks unreachable pairs."""
        dist = np.full((self.k, self.k), -1, dtype=np.int64)
        for u in range(self.k):
            dist[u] = _bfs(self.adjacency, u)
        dist.setflags(write=False)
        return dist

    @property
    def diameter(self) -> int:
        return int(self.distances.max())

    def is_complete(self) -> bool:
        return bool(np.all(self.degrees == self.k - 1))

    def __repr__(self):
        label = self.name or f"k={self.k}"
        return f"Graph({label}, |E|={len(self.edges)})"


def _bfs(adjacency, u: int) -> np.ndarray:
    dist = np.full(len(adjacency), -1, dtype=np.int64)
    dist[u] = 0
    queue = deque([u])
    while queue:
        a = queue.popleft()
        for b in adjacency[a]:
            if dist[b] < 0:
                dist[b] = dist[a] + 1
                queue.append(b)
    return dist


def distances_from(g: Graph, u: int) -> np.ndarray:
    return g.distances[u].copy()


def diameter(g: Graph) -> int:
    return g.diameter


def max_degree(g: Graph) -> int:
    return g.max_degree


def complete_graph(k: int) -> Graph:
    if k < 1:
        raise GraphError("complete graph needs k >= 1")
    return Graph.from_edges(k, [(i, j) for i in range(k) for j in range(i + 1, k)], f"complete:{k}")


def path_graph(k: int) -> Graph:
    if k < 1:
        raise GraphError("path graph needs k >= 1")
    return Graph.from_edges(k, [(i, i + 1) for i in range(k - 1)], f"path:{k}")


def cycle_graph(k: int) -> Graph:
    if k < 3:
        raise GraphError("cycle graph needs k >= 3")
    return Graph.from_edges(k, [(i, (i + 1) % k) for i in range(k)], f"cycle:{k}")


def star_graph(k: int) -> Graph:
    """Vertex 0 is the centre, 1..k-1 are leaves."""
    if k < 2:
        raise GraphError("star graph needs k >= 2")
    return Graph.from_edges(k, [(0, j) for j in range(1, k)], f"star:{k}")


def grid_graph(rows: int, cols: int) -> Graph:
    """4-neighbour grid, vertices numbered row-major."""
    if rows < 1 or cols < 1:
        raise GraphError("grid dimensions must be positive")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph.from_edges(rows * cols, edges, f"grid:{rows}x{cols}")


def load_graph(text: str, collapse_duplicates: bool = False, name: str = "") -> Graph:
    """Parse the edge-list format: first line ``k``, then one ``i j`` pair per line.

    Blank lines and ``#`` comments are ignored. Duplicate edges (in either
    orientation) are an error unless ``collapse_duplicates`` is set.
    """
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise GraphError("empty graph description")
    try:
        k = int(lines[0])
    except ValueError:
        raise GraphError(f"malformed header line: {lines[0]!r}") from None
    seen = set()
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"malformed line {lineno}: {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"malformed line {lineno}: {line!r}") from None
        if i == j:
            raise GraphError(f"self-loop at vertex {i} (line {lineno})")
        if not (0 <= i < k and 0 <= j < k):
            raise GraphError(f"vertex index out of range on line {lineno}: {line!r}")
        key = (min(i, j), max(i, j))
        if key in seen:
            if not collapse_duplicates:
                raise GraphError(f"duplicate edge {key} on line {lineno}")
            continue
        seen.add(key)
        edges.append(key)
    return Graph.from_edges(k, edges, name)


def parse_graph_spec(spec: str) -> Graph:
    """Build a graph from a CLI spec such as ``complete:3``, ``grid:8x8`` or ``file:g.txt``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "complete":
            return complete_graph(int(arg))
        if kind == "path":
            return path_graph(int(arg))
        if kind == "cycle":
            return cycle_graph(int(arg))
        if kind == "star":
            return star_graph(int(arg))
        if kind == "grid":
            rows, _, cols = arg.lower().partition("x")
            return grid_graph(int(rows), int(cols))
    except ValueError as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError(f"bad graph spec {spec!r}") from None
    if kind == "file":
        return load_graph(Path(arg).read_text(), name=spec)
    raise GraphError(f"unknown graph kind in {spec!r}")
