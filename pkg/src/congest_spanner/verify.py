"""Independent checkers.

Nothing here reuses the search code in ``graph_core`` or the protocol code:
the all-pairs oracle is a Floyd-Warshall over a packed ``(length, weight)``
key, the single-source oracle is a lexicographic Dijkstra, and small graphs
are additionally checked by enumerating simple paths.
"""
from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import asdict, dataclass
from typing import Any, Iterable, NamedTuple

import numpy as np

from .graph_core import Graph, WbfsTree

__all__ = [
    "Violation",
    "StretchCheck",
    "EXHAUSTIVE_MAX_NODES",
    "all_pairs_lex",
    "lex_dijkstra",
    "enumerate_shortest_paths",
    "count_lightest_shortest_paths",
    "true_proximity_lists",
    "check_wbfs_tree",
    "check_stretch",
    "check_detection",
    "write_violations",
]

EXHAUSTIVE_MAX_NODES = 12
_INF = 1 << 61


@dataclass(frozen=True)
class Violation:
    kind: str  # distance | weight | stretch | detection | invariant
    location: tuple
    expected: Any
    actual: Any
    detail: str = ""

    def to_json(self) -> dict:
        rec = asdict(self)
        rec["location"] = list(self.location)
        return {"kind": "violation", "violation": rec.pop("kind"), **rec}


class StretchCheck(NamedTuple):
    max_excess: float  # an int, or math.inf when H disconnects a pair
    worst_pair: tuple[int, int] | None
    passed: bool


def _hops(adj: list[list[int]], src: int) -> list[int]:
    dist = [-1] * len(adj)
    dist[src] = 0
    q = deque([src])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def all_pairs_lex(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs ``(hop distance, lightest weight among shortest)`` matrices."""
    n = g.n
    big = n * max(g.max_weight, 1) + 1
    if n * big >= _INF:
        # packed key would overflow int64; fall back to per-source Dijkstra
        dist = np.zeros((n, n), dtype=np.int64)
        wt = np.zeros((n, n), dtype=object)
        for s in range(n):
            for v, (d, w) in lex_dijkstra(g, s).items():
                dist[s, v], wt[s, v] = d, w
        return dist, wt
    key = np.full((n, n), _INF, dtype=np.int64)
    np.fill_diagonal(key, 0)
    for u, v, w in g.edges():
        key[u, v] = key[v, u] = big + w
    for k in range(n):
        np.minimum(key, key[:, k, None] + key[None, k, :], out=key)
    return key // big, key % big


def lex_dijkstra(g: Graph, source: int) -> dict[int, tuple[int, int]]:
    """``v -> (length, weight)`` minimized lexicographically."""
    best = {source: (0, 0)}
    heap = [(0, 0, source)]
    done = set()
    while heap:
        d, w, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, wt in g.adj[u]:
            cand = (d + 1, w + wt)
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, (cand[0], cand[1], v))
    return best


def enumerate_shortest_paths(g: Graph, s: int, t: int, max_len: int = EXHAUSTIVE_MAX_NODES) -> list[tuple[int, ...]]:
    """All minimum-hop simple paths from s to t by exhaustive DFS."""
    found: list[tuple[int, ...]] = []
    best = [max_len + 1]
    path = [s]
    on = {s}

    def dfs(u: int) -> None:
        if len(path) - 1 > best[0]:
            return
        if u == t:
            if len(path) - 1 < best[0]:
                best[0] = len(path) - 1
                found.clear()
            found.append(tuple(path))
            return
        for v, _ in g.adj[u]:
            if v not in on:
                on.add(v)
                path.append(v)
                dfs(v)
                path.pop()
                on.discard(v)

    dfs(s)
    return found


def _path_weight(g: Graph, p: Iterable[int]) -> int:
    p = list(p)
    return sum(g.weight(a, b) for a, b in zip(p, p[1:]))


def count_lightest_shortest_paths(g: Graph, source: int) -> dict[int, int]:
    """Number of distinct shortest paths from ``source`` attaining the minimum weight."""
    adj = [[u for u, _ in a] for a in g.adj]
    hop = _hops(adj, source)
    order = sorted(range(g.n), key=lambda v: hop[v])
    weight = {source: 0}
    count = {source: 1}
    for v in order[1:]:
        opts = [(weight[u] + g.weight(u, v), u) for u in adj[v] if hop[u] == hop[v] - 1]
        wmin = min(w for w, _ in opts)
        weight[v] = wmin
        count[v] = sum(count[u] for w, u in opts if w == wmin)
    return count


def true_proximity_lists(g: Graph, sources: Iterable[int]) -> dict[int, list[tuple[int, int, int]]]:
    """Exact sorted ``(d, s, w)`` lists for every node."""
    dist, wt = all_pairs_lex(g)
    src = sorted(set(sources))
    return {v: sorted((int(dist[s, v]), s, int(wt[s, v])) for s in src) for v in range(g.n)}


def check_wbfs_tree(g: Graph, tree: WbfsTree) -> list[Violation]:
    """Both WBFS properties, verified by walking the tree's parent pointers."""
    out: list[Violation] = []
    s = tree.source
    adj = [[u for u, _ in a] for a in g.adj]
    hop = _hops(adj, s)
    lex = lex_dijkstra(g, s)
    exhaustive = g.n <= EXHAUSTIVE_MAX_NODES
    for v in range(g.n):
        if v not in tree.parent:
            out.append(Violation("distance", (s, v), hop[v], None, "node missing from tree"))
            continue
        length, weight, cur = 0, 0, v
        while cur != s:
            p = tree.parent.get(cur)
            if p is None or not g.has_edge(cur, p) or length > g.n:
                length = None
                break
            weight += g.weight(cur, p)
            length += 1
            cur = p
        if length is None:
            out.append(Violation("distance", (s, v), hop[v], None, "parent walk does not reach source"))
            continue
        if length != hop[v]:
            out.append(Violation("distance", (s, v), hop[v], length, "tree path is not shortest"))
            continue
        if weight != lex[v][1]:
            out.append(Violation("weight", (s, v), lex[v][1], weight, "lighter shortest path exists"))
        elif exhaustive and v != s:
            best = min(_path_weight(g, p) for p in enumerate_shortest_paths(g, s, v))
            if best != weight:
                out.append(Violation("weight", (s, v), best, weight, "exhaustive enumeration"))
        if tree.dist.get(v) != length:
            out.append(Violation("distance", (s, v), length, tree.dist.get(v), "recorded dist"))
        if tree.weight.get(v) != weight:
            out.append(Violation("weight", (s, v), weight, tree.weight.get(v), "recorded weight"))
    return out


def check_stretch(g: Graph, h: Iterable[tuple[int, int]], beta: int) -> StretchCheck:
    """Exact additive stretch of the spanning subgraph with edge set ``h``."""
    g_adj = [[u for u, _ in a] for a in g.adj]
    h_adj: list[list[int]] = [[] for _ in range(g.n)]
    for u, v in set((min(a, b), max(a, b)) for a, b in h):
        if not g.has_edge(u, v):
            raise ValueError(f"({u}, {v}) is not an edge of G")
        h_adj[u].append(v)
        h_adj[v].append(u)
    worst, pair = 0, None
    for x in range(g.n):
        dg = _hops(g_adj, x)
        dh = _hops(h_adj, x)
        for y in range(x + 1, g.n):
            excess = math.inf if dh[y] < 0 else dh[y] - dg[y]
            if excess > worst:
                worst, pair = excess, (x, y)
    return StretchCheck(worst, pair, worst <= beta)


def check_detection(g: Graph, sources, d: int, k: int, answer) -> list[Violation]:
    """Compare per-node ``(entries, parents)`` against the exact truncated lists."""
    out: list[Violation] = []
    truth = true_proximity_lists(g, sources)
    for v in range(g.n):
        full = truth[v]
        lam = sum(1 for t in full if t[0] <= d)
        want = full[: min(k, lam)]
        entries, parents = answer.get(v, ([], {}))
        got = [(int(t.d), int(t.s), int(t.w)) if hasattr(t, "d") else tuple(t) for t in entries]
        if got != want:
            out.append(Violation("detection", (v,), want, got))
            continue
        for dd, s, w in want:
            p = parents.get(s)
            if s == v and dd == 0:
                if p is not None:
                    out.append(Violation("detection", (v, s), None, p, "source parent"))
                continue
            if p is None or not g.has_edge(v, p):
                out.append(Violation("detection", (v, s), "neighbor", p, "parent"))
                continue
            up = next((t for t in truth[p] if t[1] == s), None)
            if up is None or (up[0] + 1, up[2] + g.weight(p, v)) != (dd, w):
                out.append(Violation("detection", (v, s), (dd, w), up, "parent not on a lightest shortest path"))
    return out


def write_violations(violations: Iterable[Violation], fh) -> None:
    for viol in violations:
        fh.write(json.dumps(viol.to_json(), default=str) + "\n")
