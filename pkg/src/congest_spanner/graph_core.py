"""Graph representation, generators and exact sequential oracles.

Graphs are simple, undirected, connected and carry non-negative integer
edge weights.  Node ids are exactly ``0 .. n-1``.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

__all__ = [
    "GraphError",
    "Graph",
    "Path",
    "WbfsTree",
    "WEIGHT_EXPONENT",
    "generate_graph",
    "assign_random_weights",
    "bfs_distances",
    "diameter",
    "sequential_wbfs_tree",
    "load_edge_list",
    "write_edge_list",
]

# Largest admissible weight bound is n ** WEIGHT_EXPONENT (weights must fit a message).
WEIGHT_EXPONENT = 5


class GraphError(ValueError):
    """Raised when a graph violates one of the structural invariants."""


def _edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class Graph:
    """Immutable simple connected undirected graph with integer weights.

    ``adj[v]`` is the sorted tuple of ``(neighbor, weight)`` pairs of ``v``.
    ``max_weight`` is the declared weight bound W; it defaults to the
    heaviest edge present.
    """

    __slots__ = ("n", "adj", "max_weight", "meta", "_w")

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int, int]],
        *,
        max_weight: int | None = None,
        meta: dict | None = None,
        weight_exponent: int = WEIGHT_EXPONENT,
    ) -> None:
        if n < 2:
            raise GraphError(f"need at least 2 nodes, got n={n}")
        w_maps: list[dict[int, int]] = [{} for _ in range(n)]
        heaviest = 0
        for u, v, w in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if w < 0:
                raise GraphError(f"edge ({u}, {v}) has negative weight {w}")
            if v in w_maps[u]:
                raise GraphError(f"parallel edge ({u}, {v})")
            w_maps[u][v] = w
            w_maps[v][u] = w
            heaviest = max(heaviest, w)
        if max_weight is None:
            max_weight = heaviest
        if heaviest > max_weight:
            raise GraphError(f"edge weight {heaviest} exceeds declared bound W={max_weight}")
        if max_weight > n**weight_exponent:
            raise GraphError(
                f"weight bound W={max_weight} exceeds n^{weight_exponent}={n**weight_exponent}"
            )
        self.n = n
        self.max_weight = max_weight
        self.meta = dict(meta or {})
        self._w = w_maps
        self.adj = tuple(tuple(sorted(m.items())) for m in w_maps)
        if not _is_connected(self.adj):
            raise GraphError("graph is not connected")

    # -- accessors ---------------------------------------------------------
    def neighbors(self, v: int) -> list[int]:
        return [u for u, _ in self.adj[v]]

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def weight(self, u: int, v: int) -> int:
        return self._w[u][v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._w[u]

    def weight_map(self, v: int) -> dict[int, int]:
        """Copy of ``{neighbor: weight}`` for node ``v``."""
        return dict(self._w[v])

    def edges(self) -> Iterator[tuple[int, int, int]]:
        """Yield ``(u, v, w)`` with ``u < v`` in lexicographic order."""
        for u in range(self.n):
            for v, w in self.adj[u]:
                if u < v:
                    yield u, v, w

    def edge_set(self) -> set[tuple[int, int]]:
        return {(u, v) for u, v, _ in self.edges()}

    @property
    def m(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def reweighted(self, weight_of, *, max_weight: int | None = None) -> "Graph":
        """Same topology, weights given by ``weight_of(u, v)`` (called with u < v)."""
        return Graph(
            self.n,
            ((u, v, weight_of(u, v)) for u, v, _ in self.edges()),
            max_weight=max_weight,
            meta=self.meta,
        )

    def subgraph(self, edge_set: Iterable[tuple[int, int]]) -> "Graph":
        """Spanning subgraph on the given edges; raises if it is disconnected."""
        es = {_edge_key(u, v) for u, v in edge_set}
        for u, v in es:
            if not self.has_edge(u, v):
                raise GraphError(f"({u}, {v}) is not an edge of the host graph")
        return Graph(self.n, ((u, v, self._w[u][v]) for u, v in sorted(es)), max_weight=self.max_weight)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.adj == other.adj and self.max_weight == other.max_weight

    def __hash__(self) -> int:
        return hash((self.n, self.adj))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m}, W={self.max_weight})"


def _is_connected(adj: Sequence[Sequence[tuple[int, int]]]) -> bool:
    seen = [False] * len(adj)
    seen[0] = True
    stack = [0]
    count = 1
    while stack:
        u = stack.pop()
        for v, _ in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == len(adj)


@dataclass(frozen=True)
class Path:
    """A simple path, given as its node sequence."""

    nodes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError(f"path repeats a node: {self.nodes}")

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    def edges(self) -> list[tuple[int, int]]:
        return [_edge_key(a, b) for a, b in zip(self.nodes, self.nodes[1:])]

    def weight(self, g: Graph) -> int:
        total = 0
        for a, b in zip(self.nodes, self.nodes[1:]):
            if not g.has_edge(a, b):
                raise GraphError(f"({a}, {b}) is not an edge")
            total += g.weight(a, b)
        return total


@dataclass
class WbfsTree:
    """Lightest-shortest-path tree rooted at ``source``.

    ``parent[source]`` is ``None`` (the root sentinel).
    """

    source: int
    parent: dict[int, int | None] = field(default_factory=dict)
    dist: dict[int, int] = field(default_factory=dict)
    weight: dict[int, int] = field(default_factory=dict)

    def path_to(self, v: int) -> Path:
        """Tree path from the source to ``v``."""
        nodes = [v]
        while nodes[-1] != self.source:
            p = self.parent[nodes[-1]]
            if p is None or len(nodes) > len(self.parent):
                raise GraphError(f"parent walk from {v} does not reach the source")
            nodes.append(p)
        return Path(tuple(reversed(nodes)))


# -- generators ---------------------------------------------------------------

GRAPH_KINDS = ("gnp", "path", "cycle", "complete", "grid", "star")


def generate_graph(kind: str, params: dict | None = None, seed: int = 0, **kw) -> Graph:
    """Build a connected unit-weight graph of the given family.

    ``params`` (or keyword arguments) hold ``n`` for every kind, ``p`` for
    ``gnp`` and ``rows``/``cols`` for ``grid``.  A disconnected ``gnp`` sample
    is repaired by adding the missing edges of the Hamiltonian cycle
    ``0-1-...-(n-1)-0``; ``meta["repaired_edges"]`` counts them.
    """
    params = {**(params or {}), **kw}
    if kind == "grid":
        rows, cols = int(params["rows"]), int(params["cols"])
        n = rows * cols
    else:
        n = int(params["n"])
    if n < 2:
        raise GraphError(f"need at least 2 nodes, got n={n}")
    meta = {"kind": kind, "params": dict(sorted(params.items())), "seed": seed}
    edges: set[tuple[int, int]] = set()

    if kind == "path":
        edges = {(i, i + 1) for i in range(n - 1)}
    elif kind == "cycle":
        if n < 3:
            raise GraphError("cycle needs n >= 3")
        edges = {_edge_key(i, (i + 1) % n) for i in range(n)}
    elif kind == "complete":
        edges = {(u, v) for u in range(n) for v in range(u + 1, n)}
    elif kind == "star":
        edges = {(0, v) for v in range(1, n)}
    elif kind == "grid":
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    edges.add((v, v + 1))
                if r + 1 < rows:
                    edges.add((v, v + cols))
    elif kind == "gnp":
        p = float(params["p"])
        if not 0.0 < p <= 1.0:
            raise GraphError(f"gnp probability must lie in (0, 1], got {p}")
        rng = random.Random(seed)
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < p:
                    edges.add((u, v))
        repaired = 0
        if not _is_connected(_adj_from(n, edges)):
            ring = {_edge_key(i, (i + 1) % n) for i in range(n)} if n > 2 else {(0, 1)}
            repaired = len(ring - edges)
            edges |= ring
        meta["repaired_edges"] = repaired
    else:
        raise GraphError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")

    return Graph(n, ((u, v, 1) for u, v in sorted(edges)), meta=meta)


def _adj_from(n: int, edges: Iterable[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append((v, 1))
        adj[v].append((u, 1))
    return adj


def assign_random_weights(g: Graph, max_weight: int, seed: int) -> Graph:
    """Redraw every edge weight uniformly from ``1..max_weight``."""
    if max_weight < 1:
        raise GraphError(f"max_weight must be >= 1, got {max_weight}")
    rng = random.Random(seed)
    drawn = {(u, v): rng.randint(1, max_weight) for u, v, _ in g.edges()}
    meta = {**g.meta, "weights": {"max_weight": max_weight, "seed": seed}}
    return Graph(g.n, ((u, v, w) for (u, v), w in drawn.items()), max_weight=max_weight, meta=meta)


# -- oracles ------------------------------------------------------------------

def bfs_distances(g: Graph, source: int) -> dict[int, int]:
    """Unweighted hop distances from ``source``."""
    if not 0 <= source < g.n:
        raise GraphError(f"source {source} out of range")
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v, _ in g.adj[u]:
            if v not in dist:
                dist[v] = du
                queue.append(v)
    return dist


def diameter(g: Graph) -> int:
    return max(max(bfs_distances(g, s).values()) for s in range(g.n))


def sequential_wbfs_tree(g: Graph, source: int) -> WbfsTree:
    """WBFS tree by BFS-layer refinement.

    Nodes are finalized in order of non-decreasing hop distance; each picks
    the already-finalized neighbor one layer closer minimizing the
    accumulated weight, ties going to the smaller id.
    """
    dist = bfs_distances(g, source)
    order = sorted(range(g.n), key=lambda v: (dist[v], v))
    tree = WbfsTree(source, {source: None}, {source: 0}, {source: 0})
    for v in order[1:]:
        dv = dist[v]
        best: tuple[int, int] | None = None
        for u, w in g.adj[v]:
            if dist[u] == dv - 1:
                cand = (tree.weight[u] + w, u)
                if best is None or cand < best:
                    best = cand
        assert best is not None
        tree.weight[v], tree.parent[v] = best
        tree.dist[v] = dv
    return tree


# -- edge-list files ----------------------------------------------------------

def load_edge_list(path_or_lines, *, weight_exponent: int = WEIGHT_EXPONENT) -> Graph:
    """Parse the ``n m W`` edge-list format.

    Raises :class:`GraphError` naming the line of the first violation.
    """
    if isinstance(path_or_lines, (str, bytes)) or hasattr(path_or_lines, "__fspath__"):
        with open(path_or_lines, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = list(path_or_lines)

    header = None
    edges: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        try:
            nums = [int(x) for x in parts]
        except ValueError:
            raise GraphError(f"line {lineno}: expected integers, got {text!r}") from None
        if len(nums) != 3:
            raise GraphError(f"line {lineno}: expected 3 fields, got {len(nums)}")
        if header is None:
            n, m, W = nums
            if n < 2:
                raise GraphError(f"line {lineno}: need n >= 2, got {n}")
            if m < 0 or W < 0:
                raise GraphError(f"line {lineno}: m and W must be non-negative")
            if W > n**weight_exponent:
                raise GraphError(f"line {lineno}: W={W} exceeds n^{weight_exponent}")
            header = (n, m, W, lineno)
            continue
        n, m, W, _ = header
        u, v, w = nums
        if not 0 <= u < v < n:
            raise GraphError(f"line {lineno}: need 0 <= u < v < n, got u={u} v={v}")
        if not 0 <= w <= W:
            raise GraphError(f"line {lineno}: weight {w} outside 0..{W}")
        if (u, v) in seen:
            raise GraphError(f"line {lineno}: duplicate edge ({u}, {v})")
        seen.add((u, v))
        edges.append((u, v, w))
        if len(edges) > m:
            raise GraphError(f"line {lineno}: more than the declared {m} edges")
    if header is None:
        raise GraphError("line 1: missing 'n m W' header")
    n, m, W, hline = header
    if len(edges) != m:
        raise GraphError(f"line {hline}: header declares {m} edges, found {len(edges)}")
    try:
        return Graph(n, edges, max_weight=W, weight_exponent=weight_exponent)
    except GraphError as exc:
        raise GraphError(f"line {hline}: {exc}") from None


def write_edge_list(g: Graph, path=None, *, comment: str | None = None) -> str:
    """Serialize ``g``; writes to ``path`` when given and returns the text."""
    out = []
    if comment:
        out.extend(f"# {line}" for line in comment.splitlines())
    out.append(f"{g.n} {g.m} {g.max_weight}")
    out.extend(f"{u} {v} {w}" for u, v, w in g.edges())
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
