"""Weighted distributed Bellman-Ford: multiple lightest-shortest-path trees.

Every node keeps a proximity list of ``(d, s, w)`` triplets, one per known
source, ordered lexicographically.  Each round it broadcasts the smallest
triplet it has not sent yet, then folds in what it received: a triplet for
source ``s`` from neighbor ``u`` becomes ``(d + 1, s, w + w(u, v))`` and
replaces the current entry for ``s`` only if it is shorter, or equally long
and strictly lighter.
"""
from __future__ import annotations

import heapq
from bisect import bisect_left, bisect_right, insort
from collections import defaultdict
from functools import partial
from typing import Collection, Iterable

from .congest_sim import NodeProgram, SimConfig, Trace, Triplet, run_simulation
from .graph_core import Graph, WbfsTree, diameter
from .verify import Violation

__all__ = [
    "IncompleteRun",
    "WbfsNode",
    "wbfs_program",
    "run_wbfs",
    "extract_trees",
    "solve_detection",
    "check_round_invariants",
    "last_change_round",
    "dump_states",
]


class IncompleteRun(RuntimeError):
    """A node is missing an entry the round budget should have produced."""


class WbfsNode(NodeProgram):
    """Node program for one vertex.

    ``weights`` maps each neighbor to the weight of the connecting edge.
    With ``retain_log`` every accepted triplet is logged as
    ``(round, sender, source)``; the spanner buy phase replays it backwards.
    """

    def __init__(
        self,
        node: int,
        weights: dict[int, int],
        sources: Collection[int],
        retain_log: bool = False,
    ) -> None:
        self.node = node
        self.weights = weights
        self.retain_log = retain_log
        # source -> [d, w, sent, parent]
        self.entries: dict[int, list] = {}
        self.order: list[tuple[int, int, int]] = []
        self._unsent: list[tuple[int, int, int]] = []
        self.receive_log: list[tuple[int, int, int]] = []
        self.accepted_round: dict[int, int] = {}
        self.sent_count = 0
        self._changed: dict[int, tuple[int, int, int] | None] = {}
        self._events: list[dict] = []
        if node in sources:
            t = (0, node, 0)
            self.entries[node] = [0, 0, False, None]
            self.order.append(t)
            self._unsent.append(t)
            self._events.append({"op": "insert", "round": 0, "triplet": t, "index": 1})

    def outgoing(self, round: int):
        heap = self._unsent
        entries = self.entries
        while heap:
            d, s, w = heap[0]
            e = entries[s]
            if e[0] == d and e[1] == w and not e[2]:
                break
            heapq.heappop(heap)
        if not heap:
            return None
        t = heapq.heappop(heap)
        entries[t[1]][2] = True
        self.sent_count += 1
        if self.record_events:
            self._events.append(
                {"op": "send", "round": round, "triplet": t, "index": bisect_left(self.order, t) + 1}
            )
        return Triplet(*t)

    def receive(self, round: int, sender: int, message) -> None:
        d = message.d + 1
        w = message.w + self.weights[sender]
        s = message.s
        e = self.entries.get(s)
        if e is not None and (e[0] < d or (e[0] == d and e[1] <= w)):
            return
        order = self.order
        if self.record_events and s not in self._changed:
            self._changed[s] = (e[0], s, e[1]) if e is not None else None
        if e is not None:
            old = (e[0], s, e[1])
            del order[bisect_left(order, old)]
        t = (d, s, w)
        self.entries[s] = [d, w, False, sender]
        insort(order, t)
        heapq.heappush(self._unsent, t)
        if self.retain_log:
            self.receive_log.append((round, sender, s))
            self.accepted_round[s] = round

    def end_round(self, round: int) -> None:
        if not self._changed:
            return
        for s, old in sorted(self._changed.items()):
            e = self.entries[s]
            new = (e[0], s, e[1])
            if old is not None:
                self._events.append({"op": "remove", "round": round, "triplet": old})
            self._events.append(
                {"op": "insert", "round": round, "triplet": new, "index": bisect_left(self.order, new) + 1}
            )
        self._changed.clear()

    def drain_events(self) -> list[dict]:
        evs, self._events = self._events, []
        return evs

    # -- views -------------------------------------------------------------
    def proximity_list(self) -> list[Triplet]:
        return [Triplet(*t) for t in self.order]

    def path_map(self) -> dict[int, int | None]:
        """Source -> parent neighbor; a source maps itself to ``None`` (root)."""
        return {s: e[3] for s, e in self.entries.items()}

    def parent(self, source: int) -> int | None:
        return self.entries[source][3]


def wbfs_program(g: Graph, sources: Iterable[int], *, retain_log: bool = False):
    """Factory ``node -> WbfsNode`` for running on ``g``."""
    src = frozenset(sources)
    if not src:
        raise ValueError("need at least one source")
    return lambda v: WbfsNode(v, g.weight_map(v), src, retain_log)


def run_wbfs(
    g: Graph,
    sources: Iterable[int],
    rounds: int | None = None,
    *,
    record_trace: bool = False,
    retain_log: bool = False,
    delivery_order: str = "ascending",
    seed: int = 0,
    bandwidth_check: bool = True,
    threads: int | None = None,
) -> tuple[list[WbfsNode], Trace]:
    """Simulate the protocol; the default budget is ``|S| + D - 1`` rounds."""
    src = sorted(set(sources))
    if rounds is None:
        rounds = len(src) + diameter(g) - 1
    cfg = SimConfig(
        max_rounds=rounds,
        bandwidth_check=bandwidth_check,
        record_trace=record_trace,
        global_seed=seed,
        delivery_order=delivery_order,
    )
    if threads is not None:
        cfg.threads = threads
    states, trace = run_simulation(g, wbfs_program(g, src, retain_log=retain_log), cfg)
    return states, trace


def extract_trees(states: list[WbfsNode], sources: Iterable[int]) -> dict[int, WbfsTree]:
    trees = {}
    for s in sorted(set(sources)):
        tree = WbfsTree(s)
        for v, st in enumerate(states):
            e = st.entries.get(s)
            if e is None:
                raise IncompleteRun(f"node {v} has no entry for source {s}")
            tree.dist[v], tree.weight[v], tree.parent[v] = e[0], e[1], e[3]
        trees[s] = tree
    return trees


def solve_detection(
    g: Graph,
    sources: Iterable[int],
    d: int,
    k: int,
    *,
    diameter_bound: int | None = None,
    seed: int = 0,
) -> dict[int, tuple[list[Triplet], dict[int, int | None]]]:
    """Weighted (S, d, k)-detection.

    Runs ``min(d, D) + min(k, |S|)`` rounds, then each node keeps its first
    ``min(k, lambda)`` entries.  ``lambda`` is counted locally as the number
    of entries with distance at most ``d``; at that round this equals
    ``min(k, lambda_v^d)`` because the prefix is already exact.
    """
    if d < 0 or k < 1:
        raise ValueError(f"need d >= 0 and k >= 1, got d={d} k={k}")
    src = sorted(set(sources))
    D = diameter(g) if diameter_bound is None else diameter_bound
    rounds = min(d, D) + min(k, len(src))
    states, _ = run_wbfs(g, src, rounds, seed=seed)
    out = {}
    for v, st in enumerate(states):
        within = sum(1 for t in st.order if t[0] <= d)
        keep = st.order[: min(k, within)]
        out[v] = ([Triplet(*t) for t in keep], {t[1]: st.entries[t[1]][3] for t in keep})
    return out


def last_change_round(trace: Trace) -> int:
    """Last round during which some proximity list changed (0 if none)."""
    last = 0
    for _, ev in trace.all_events():
        if ev["op"] in ("insert", "remove"):
            last = max(last, ev["round"])
    return last


def check_round_invariants(trace: Trace) -> list[Violation]:
    """Check index monotonicity and the send/insert timing bounds.

    (a) a live triplet's list index never decreases;
    (b) a triplet sent in round r has ``d + index >= r``;
    (c) a triplet inserted in round r has ``d + index(r + 1) > r``;
    (d) a node broadcasts at most one triplet per round.
    """
    out: list[Violation] = []
    by_round: dict[int, dict[int, list[dict]]] = defaultdict(lambda: defaultdict(list))
    for node, ev in trace.all_events():
        by_round[ev["round"]][node].append(ev)

    lists: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    for r in sorted(by_round):
        for node, evs in sorted(by_round[r].items()):
            cur = lists[node]
            sends = [e for e in evs if e["op"] == "send"]
            if len(sends) > 1:
                out.append(Violation("invariant", (node, r), "<= 1 send per round", len(sends), "d"))
            for e in sends:
                d, s, w = e["triplet"]
                if d + e["index"] < r:
                    out.append(Violation("invariant", (node, r), f">= {r}", d + e["index"], "b"))
                t = tuple(e["triplet"])
                pos = bisect_left(cur, t)
                if pos < len(cur) and cur[pos] == t and pos + 1 != e["index"]:
                    out.append(Violation("invariant", (node, r), pos + 1, e["index"], "send index"))

            removed = sorted(tuple(e["triplet"]) for e in evs if e["op"] == "remove")
            inserted = [e for e in evs if e["op"] == "insert"]
            if not removed and not inserted:
                continue
            ins = sorted(tuple(e["triplet"]) for e in inserted)
            out.extend(_index_drops(node, r, cur, removed, ins))
            for t in removed:
                pos = bisect_left(cur, t)
                if pos < len(cur) and cur[pos] == t:
                    del cur[pos]
                else:
                    out.append(Violation("invariant", (node, r), "present", "absent", "remove"))
            for t in ins:
                insort(cur, t)
            for e in inserted:
                t = tuple(e["triplet"])
                idx = bisect_left(cur, t) + 1
                if idx != e["index"]:
                    out.append(Violation("invariant", (node, r), idx, e["index"], "insert index"))
                if t[0] + e["index"] <= r:
                    out.append(Violation("invariant", (node, r), f"> {r}", t[0] + e["index"], "c"))

    for rec in trace.rounds:
        per_sender: dict[int, set] = defaultdict(set)
        for src, _, msg in rec.messages:
            if isinstance(msg, Triplet):
                per_sender[src].add(msg)
        for src, vals in per_sender.items():
            if len(vals) > 1:
                out.append(Violation("invariant", (src, rec.round), "1 distinct triplet", len(vals), "d"))
    return out


def _index_drops(node, r, cur, removed, inserted) -> list[Violation]:
    """Survivors whose index would drop after applying this round's changes."""
    events = sorted([(t, -1) for t in removed] + [(t, +1) for t in inserted])
    balance = 0
    for j, (t, delta) in enumerate(events):
        balance += delta
        if balance >= 0:
            continue
        lo = bisect_right(cur, t)
        hi = bisect_left(cur, events[j + 1][0]) if j + 1 < len(events) else len(cur)
        if hi > lo:
            return [Violation("invariant", (node, r), ">= old index", f"drop by {-balance}", "a")]
    return []


def dump_states(states: list[WbfsNode]) -> list[dict]:
    """JSON-ready per-node lists ``{node, entries: [{d, s, w, parent}]}``."""
    return [
        {
            "node": v,
            "entries": [{"d": d, "s": s, "w": w, "parent": st.entries[s][3]} for d, s, w in st.order],
        }
        for v, st in enumerate(states)
    ]
