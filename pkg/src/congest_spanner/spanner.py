"""(+6)-additive spanners by clustering and path buying.

The sequential construction and the message-passing one draw every random
bit from the same per-node seeds, so for a given ``seed`` both pick the same
cluster centers and the same sampled center sets ``S_k``.
"""
from __future__ import annotations

import dataclasses
import math
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable

from .congest_sim import (
    Announce,
    AnnounceTag,
    Buy,
    NodeProgram,
    Report,
    SimConfig,
    Trace,
    RoundRecord,
    Triplet,
    derive_seed,
    node_seed,
    run_simulation,
)
from .graph_core import Graph, sequential_wbfs_tree
from .wbfs import IncompleteRun, WbfsNode

__all__ = [
    "PathBuyParams",
    "Clustering",
    "Purchase",
    "SpannerResult",
    "SetupResult",
    "PipelineOverflow",
    "is_center",
    "in_sample",
    "cluster",
    "missing_edge_weights",
    "sequential_6ap",
    "leader_bfs_setup",
    "distributed_6ap",
    "LEADER",
    "size_scale",
    "round_scale",
    "fit_round_bound",
]

LEADER = 0
CLUSTER_EDGE = "cluster-edge"
UNCLUSTERED_STAR = "unclustered-star"
BOUGHT_PATH = "bought-path"


class PipelineOverflow(RuntimeError):
    """A pipelined phase would need two messages on one edge in one round."""


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class PathBuyParams:
    """Sampling rates and the scale range; natural logarithms throughout."""

    n: int
    c: float = 3.0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"need n >= 2, got {self.n}")
        if not self.c > 2:
            raise ValueError(f"c must exceed 2, got {self.c}")

    @property
    def center_prob(self) -> float:
        n = self.n
        return min(1.0, self.c / (n ** (1 / 3) * math.log(n) ** (1 / 3)))

    def sk_prob(self, k: int) -> float:
        return min(1.0, 8 * self.c**2 * math.log(self.n) / k)

    @property
    def k_max(self) -> float:
        n = self.n
        return max(1.0, 8 * self.c * n ** (2 / 3) / math.log(n) ** (1 / 3))

    @property
    def scales(self) -> list[int]:
        ks, k = [], 1
        while k <= self.k_max:
            ks.append(k)
            k *= 2
        return ks


def is_center(seed: int, v: int, params: PathBuyParams) -> bool:
    return random.Random(derive_seed("center", node_seed(seed, v))).random() < params.center_prob


def in_sample(seed: int, center: int, k: int, params: PathBuyParams) -> bool:
    return random.Random(derive_seed("sk", node_seed(seed, center), k)).random() < params.sk_prob(k)


@dataclass
class Clustering:
    """Centers, cluster membership (``None`` = unclustered) and the edge set H0."""

    centers: tuple[int, ...]
    cluster_of: dict[int, int | None]
    h0: set[tuple[int, int]]

    def members(self, center: int) -> list[int]:
        """The cluster of ``center``, the center itself included."""
        return sorted(v for v, c in self.cluster_of.items() if c == center)

    def provenance(self) -> dict[tuple[int, int], str]:
        labels = {}
        for v, c in self.cluster_of.items():
            if c is not None and c != v:
                labels[_edge(v, c)] = CLUSTER_EDGE
        for e in self.h0:
            labels.setdefault(e, UNCLUSTERED_STAR)
        return labels


def cluster(g: Graph, params: PathBuyParams, seed: int, *, centers: Iterable[int] | None = None) -> Clustering:
    """Sample centers; attach every other node to its smallest-id neighboring center.

    A center belongs to its own cluster.  A node without a neighboring center
    stays unclustered and contributes all its incident edges to H0.
    ``centers`` overrides the sampling.
    """
    if centers is None:
        chosen = {v for v in range(g.n) if is_center(seed, v, params)}
    else:
        chosen = set(centers)
    cluster_of: dict[int, int | None] = {}
    h0: set[tuple[int, int]] = set()
    for v in range(g.n):
        if v in chosen:
            cluster_of[v] = v
            continue
        near = [u for u in g.neighbors(v) if u in chosen]
        if near:
            cluster_of[v] = min(near)
            h0.add(_edge(v, cluster_of[v]))
        else:
            cluster_of[v] = None
            h0.update(_edge(v, u) for u in g.neighbors(v))
    return Clustering(tuple(sorted(chosen)), cluster_of, h0)


def missing_edge_weights(g: Graph, h0: Iterable[tuple[int, int]]) -> Graph:
    """Weight 0 on H0 edges and 1 elsewhere, so path weight = missing-edge count."""
    inside = {_edge(u, v) for u, v in h0}
    for e in inside:
        if not g.has_edge(*e):
            raise ValueError(f"{e} is not an edge of the graph")
    return g.reweighted(lambda u, v: 0 if (u, v) in inside else 1, max_weight=1)


@dataclass(frozen=True)
class Purchase:
    k: int
    source: int  # c_i
    center: int  # c_j
    target: int  # v in the cluster of c_j
    length: int
    missing: int
    nodes: tuple[int, ...] | None = None


@dataclass
class SpannerResult:
    edges: set[tuple[int, int]]
    provenance: dict[tuple[int, int], str]
    clustering: Clustering
    params: PathBuyParams
    seed: int
    mode: str
    samples: dict[int, tuple[int, ...]]
    purchases: list[Purchase]
    rounds: int | None = None
    extras: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.edges)

    def per_k(self) -> list[dict]:
        bought = defaultdict(int)
        for p in self.purchases:
            bought[p.k] += 1
        return [
            {"k": k, "sk_size": len(self.samples[k]), "paths_bought": bought[k]}
            for k in sorted(self.samples)
        ]

    def bought_pairs(self) -> dict[int, set[tuple[int, int]]]:
        pairs: dict[int, set[tuple[int, int]]] = defaultdict(set)
        for p in self.purchases:
            pairs[p.k].add((p.source, p.center))
        return dict(pairs)

    def report(self, g: Graph, stretch_max=None) -> dict:
        rec = {
            "n": g.n,
            "m": g.m,
            "seed": self.seed,
            "c": self.params.c,
            "mode": self.mode,
            "edges_H": self.size,
            "size_H0": len(self.clustering.h0),
            "centers": len(self.clustering.centers),
            "rounds": self.rounds,
            "per_k": self.per_k(),
        }
        if stretch_max is not None:
            rec["stretch_max"] = stretch_max if math.isfinite(stretch_max) else None
        return rec


def _as_params(g: Graph, params) -> PathBuyParams:
    if isinstance(params, PathBuyParams):
        if params.n != g.n:
            raise ValueError(f"params are for n={params.n}, graph has n={g.n}")
        return params
    return PathBuyParams(g.n, float(params))


def sequential_6ap(g: Graph, params, seed: int, *, centers: Iterable[int] | None = None) -> SpannerResult:
    """Clustering followed by path buying over every scale k."""
    params = _as_params(g, params)
    cl = cluster(g, params, seed, centers=centers)
    g01 = missing_edge_weights(g, cl.h0)
    trees = {ci: sequential_wbfs_tree(g01, ci) for ci in cl.centers}
    members = {c: cl.members(c) for c in cl.centers}

    edges = set(cl.h0)
    provenance = cl.provenance()
    samples: dict[int, tuple[int, ...]] = {}
    purchases: list[Purchase] = []
    for k in params.scales:
        sk = tuple(cj for cj in cl.centers if in_sample(seed, cj, k, params))
        samples[k] = sk
        for ci in cl.centers:
            tree = trees[ci]
            for cj in sk:
                cands = [(tree.dist[v], tree.weight[v], v) for v in members[cj] if tree.weight[v] < 2 * k]
                if not cands:
                    continue
                length, missing, v = min(cands)
                path = tree.path_to(v)
                for e in path.edges():
                    if e not in edges:
                        edges.add(e)
                        provenance[e] = BOUGHT_PATH
                purchases.append(Purchase(k, ci, cj, v, length, missing, path.nodes))
    return SpannerResult(edges, provenance, cl, params, seed, "sequential", samples, purchases)


# -- distributed implementation ----------------------------------------------

class _LeaderSetup:
    """BFS tree from the leader, convergecast of depth and center count,
    then a broadcast of ``D' = 2 * depth`` and ``|C|``.

    Messages go through per-edge FIFO outboxes, one per edge per round.
    ``next_phase`` becomes the common round at which every node is done.
    """

    def __init__(self, node: int, nbrs: list[int], is_center: bool, start: int) -> None:
        self.node = node
        self.nbrs = nbrs
        self.is_center = is_center
        self.start = start
        self.outbox: dict[int, deque] = {u: deque() for u in nbrs}
        self.depth: int | None = None
        self.parent: int | None = None
        self.heard: set[int] = set()
        self.children: set[int] = set()
        self.child_depth: dict[int, int] = {}
        self.child_count: dict[int, int] = {}
        self.reported = False
        self.dprime: int | None = None
        self.center_count: int | None = None
        self.next_phase: int | None = None
        self._offers: list[int] = []
        if node == LEADER:
            self.depth = 0
            self._broadcast(Announce(AnnounceTag.BFS, node))

    def _broadcast(self, msg) -> None:
        for u in self.nbrs:
            self.outbox[u].append(msg)

    def outgoing(self, r: int) -> dict:
        return {u: q.popleft() for u, q in self.outbox.items() if q}

    def receive(self, r: int, sender: int, msg: Announce) -> None:
        tag = msg.tag
        if tag == AnnounceTag.BFS:
            self.heard.add(sender)
            if msg.value == self.node and sender != self.node:
                self.children.add(sender)
            if self.depth is None:
                self._offers.append(sender)
        elif tag == AnnounceTag.DEPTH:
            self.child_depth[sender] = msg.value
        elif tag == AnnounceTag.COUNT:
            self.child_count[sender] = msg.value
        elif tag == AnnounceTag.DPRIME:
            self.dprime = msg.value
            r0 = r - self.depth + 1
            self.next_phase = r0 + self.dprime // 2 + 1
            for u in sorted(self.children):
                self.outbox[u].append(msg)
        elif tag == AnnounceTag.CCOUNT:
            self.center_count = msg.value
            for u in sorted(self.children):
                self.outbox[u].append(msg)

    def end_round(self, r: int) -> None:
        if self.depth is None and self._offers:
            self.depth = r - self.start + 1
            self.parent = min(self._offers)
            self._broadcast(Announce(AnnounceTag.BFS, self.parent))
        if self.reported or self.depth is None or len(self.heard) < len(self.nbrs):
            return
        if any(c not in self.child_depth or c not in self.child_count for c in self.children):
            return
        self.reported = True
        depth = max([self.depth, *self.child_depth.values()])
        count = int(self.is_center) + sum(self.child_count.values())
        if self.node == LEADER:
            self.dprime, self.center_count = 2 * depth, count
            self.next_phase = (r + 1) + depth + 1
            for u in sorted(self.children):
                self.outbox[u].append(Announce(AnnounceTag.DPRIME, self.dprime))
                self.outbox[u].append(Announce(AnnounceTag.CCOUNT, count))
        else:
            self.outbox[self.parent].append(Announce(AnnounceTag.DEPTH, depth))
            self.outbox[self.parent].append(Announce(AnnounceTag.COUNT, count))

    @property
    def finished(self) -> bool:
        return self.next_phase is not None and self.center_count is not None


@dataclass(frozen=True)
class SetupResult:
    dprime: int
    center_count: int
    leader: int
    rounds: int


class _SetupNode(NodeProgram):
    def __init__(self, node: int, nbrs: list[int], is_center: bool) -> None:
        self.setup = _LeaderSetup(node, nbrs, is_center, start=1)
        self._last = 0

    def outgoing(self, r):
        return self.setup.outgoing(r)

    def receive(self, r, sender, msg):
        self.setup.receive(r, sender, msg)

    def end_round(self, r):
        self.setup.end_round(r)
        self._last = r

    def halted(self) -> bool:
        s = self.setup
        return s.finished and self._last >= s.next_phase - 1


def leader_bfs_setup(g: Graph, centers: Iterable[int] = (), *, seed: int = 0) -> SetupResult:
    """Run the setup phase alone and return what every node learned."""
    cset = set(centers)
    progs, trace = run_simulation(
        g,
        lambda v: _SetupNode(v, g.neighbors(v), v in cset),
        SimConfig(max_rounds=6 * g.n + 10, record_trace=False, global_seed=seed),
    )
    learned = {(p.setup.dprime, p.setup.center_count) for p in progs}
    if len(learned) != 1 or not all(p.halted() for p in progs):
        raise IncompleteRun(f"setup did not converge: {learned}")
    dprime, count = learned.pop()
    return SetupResult(dprime, count, LEADER, trace.rounds_executed)


class SpannerNode(NodeProgram):
    """All six phases of the distributed construction for one node.

    Rounds 1-2 cluster, the leader setup follows, then the WBFS over 0/1
    weights (``|C| + D'`` rounds), the pipelined reports (``|C|`` rounds),
    the buy orders from centers (``|C|`` rounds) and finally the reversed
    replay of the WBFS receptions (``|C| + D'`` rounds).
    """

    def __init__(self, node: int, nbrs: list[int], params: PathBuyParams, forced_center: bool | None) -> None:
        self.node = node
        self.nbrs = nbrs
        self.params = params
        self.forced_center = forced_center
        self.center = False
        self.center_nbrs: list[int] = []
        self.cluster_of: int | None = None
        self.joined_by: set[int] = set()
        self.h0_nbrs: set[int] = set()
        self.local_h: set[tuple[int, int]] = set()
        self.setup: _LeaderSetup | None = None
        self.wbfs: WbfsNode | None = None
        self.p3 = self.rw = self.count = None
        self.reports: deque = deque()
        self.table: dict[int, dict[int, tuple[int, int]]] = defaultdict(dict)
        self.samples: dict[int, bool] = {}
        self.purchases: list[Purchase] = []
        self.buy_queues: dict[int, deque] = {}
        self.held: set[int] = set()
        self.slots: dict[int, list[tuple[int, int]]] = defaultdict(list)
        self.forwarded: set[int] = set()
        self.final_round: int | None = None
        self._last = 0

    # phase boundaries
    @property
    def p4(self):
        return self.p3 + self.rw

    @property
    def p5(self):
        return self.p4 + self.count

    @property
    def p6(self):
        return self.p5 + self.count

    def halted(self) -> bool:
        return self.final_round is not None and self._last >= self.final_round

    def outgoing(self, r: int):
        if r == 1:
            if self.forced_center is None:
                self.center = random.Random(derive_seed("center", self.seed)).random() < self.params.center_prob
            else:
                self.center = self.forced_center
            return Announce(AnnounceTag.CENTER) if self.center else None
        if r == 2:
            v = self.node
            self.setup = _LeaderSetup(v, self.nbrs, self.center, start=3)
            if self.center:
                self.cluster_of = v
                return None
            if self.center_nbrs:
                c = min(self.center_nbrs)
                self.cluster_of = c
                self.h0_nbrs.add(c)
                self.local_h.add(_edge(v, c))
                return {c: Announce(AnnounceTag.JOIN)}
            self.h0_nbrs.update(self.nbrs)
            self.local_h.update(_edge(v, u) for u in self.nbrs)
            return Announce(AnnounceTag.UNCLUSTERED)
        if self.p3 is None or r < self.p3:
            return self.setup.outgoing(r)
        if r < self.p4:
            if self.wbfs is None:
                w = {u: 0 if u in self.h0_nbrs else 1 for u in self.nbrs}
                self.wbfs = WbfsNode(self.node, w, {self.node} if self.center else (), retain_log=True)
                self.wbfs.record_events = self.record_events
            return self.wbfs.outgoing(r - self.p3 + 1)
        if r < self.p5:
            if r == self.p4:
                self._queue_reports()
            if self.reports:
                return {self.cluster_of: self.reports.popleft()}
            return None
        if r < self.p6:
            if r == self.p5 and self.center:
                self._decide()
            return {u: q.popleft() for u, q in self.buy_queues.items() if q} or None
        if r == self.p6:
            for ci in sorted(self.held):
                self._schedule(ci, after=0)
        x = r - self.p6 + 1
        out = {}
        for parent, ci in self.slots.pop(x, []):
            out[parent] = Buy(ci)
            self.local_h.add(_edge(self.node, parent))
        return out or None

    def receive(self, r: int, sender: int, msg) -> None:
        if isinstance(msg, Triplet):
            self.wbfs.receive(r - self.p3 + 1, sender, msg)
        elif isinstance(msg, Report):
            self.table[msg.s][sender] = (msg.d, msg.missing)
        elif isinstance(msg, Buy):
            if r < self.p6:
                self.held.add(msg.s)
            else:
                self.local_h.add(_edge(self.node, sender))
                if msg.s not in self.held:
                    self.held.add(msg.s)
                    self._schedule(msg.s, after=r - self.p6 + 1)
        elif msg.tag == AnnounceTag.CENTER:
            self.center_nbrs.append(sender)
        elif msg.tag == AnnounceTag.JOIN:
            self.joined_by.add(sender)
            self.h0_nbrs.add(sender)
        elif msg.tag == AnnounceTag.UNCLUSTERED:
            self.h0_nbrs.add(sender)
        else:
            self.setup.receive(r, sender, msg)

    def end_round(self, r: int) -> None:
        self._last = r
        if r >= 3 and self.p3 is None:
            self.setup.end_round(r)
            if self.setup.finished:
                self.count = self.setup.center_count
                self.p3 = self.setup.next_phase
                self.rw = self.count + self.setup.dprime
                if self.count == 0:
                    self.final_round = self.p3 - 1
                else:
                    self.final_round = self.p6 + self.rw - 1
        elif self.wbfs is not None and self.p3 <= r < self.p4:
            self.wbfs.end_round(r - self.p3 + 1)

    def drain_events(self) -> list[dict]:
        return self.wbfs.drain_events() if self.wbfs is not None else []

    # -- helpers -----------------------------------------------------------
    def _queue_reports(self) -> None:
        order = self.wbfs.order
        if len(order) < self.count:
            raise IncompleteRun(f"node {self.node} knows {len(order)} of {self.count} centers")
        if self.center:
            for d, s, w in order:
                self.table[s][self.node] = (d, w)
        elif self.cluster_of is not None:
            self.reports.extend(Report(d, s, w) for d, s, w in order)

    def _decide(self) -> None:
        members = set(self.joined_by) | {self.node}
        wanted: dict[int, set[int]] = defaultdict(set)
        for k in self.params.scales:
            chosen = random.Random(derive_seed("sk", self.seed, k)).random() < self.params.sk_prob(k)
            self.samples[k] = chosen
            if not chosen:
                continue
            for ci in sorted(self.table):
                cands = [(d, miss, v) for v, (d, miss) in self.table[ci].items() if v in members and miss < 2 * k]
                if not cands:
                    continue
                length, missing, v = min(cands)
                self.purchases.append(Purchase(k, ci, self.node, v, length, missing))
                wanted[v].add(ci)
        for v, cis in wanted.items():
            if v == self.node:
                self.held.update(cis)
                continue
            if len(cis) > self.count:
                raise PipelineOverflow(f"center {self.node} needs {len(cis)} buy rounds to {v}")
            self.buy_queues[v] = deque(Buy(ci) for ci in sorted(cis))

    def _schedule(self, ci: int, after: int) -> None:
        if ci == self.node or ci in self.forwarded:
            return
        parent = self.wbfs.parent(ci)
        x = self.rw - self.wbfs.accepted_round[ci] + 1
        if x <= after:
            raise PipelineOverflow(f"node {self.node}: buy {ci} due in slot {x} but arrived in slot {after}")
        if any(p == parent for p, _ in self.slots[x]):
            raise PipelineOverflow(f"node {self.node}: two buys to {parent} in slot {x}")
        self.slots[x].append((parent, ci))
        self.forwarded.add(ci)


def distributed_6ap(
    g: Graph,
    params,
    seed: int,
    config: SimConfig | None = None,
    *,
    centers: Iterable[int] | None = None,
) -> tuple[SpannerResult, Trace]:
    """Simulate the full construction; ``centers`` overrides center sampling."""
    params = _as_params(g, params)
    if config is None:
        config = SimConfig(max_rounds=0, record_trace=False)
    config = dataclasses.replace(config, global_seed=seed, max_rounds=config.max_rounds or 40 * g.n + 100)
    forced = None if centers is None else set(centers)
    progs, trace = run_simulation(
        g,
        lambda v: SpannerNode(v, g.neighbors(v), params, None if forced is None else v in forced),
        config,
    )
    if not all(p.halted() for p in progs):
        raise IncompleteRun(f"construction did not finish within {config.max_rounds} rounds")

    cl = Clustering(
        tuple(v for v, p in enumerate(progs) if p.center),
        {v: p.cluster_of for v, p in enumerate(progs)},
        {_edge(v, u) for v, p in enumerate(progs) for u in p.h0_nbrs},
    )
    edges: set[tuple[int, int]] = set()
    for p in progs:
        edges |= p.local_h
    provenance = cl.provenance()
    for e in edges:
        provenance.setdefault(e, BOUGHT_PATH)
    samples = {k: tuple(c for c in cl.centers if progs[c].samples.get(k)) for k in params.scales}
    purchases = sorted(
        (pur for c in cl.centers for pur in progs[c].purchases),
        key=lambda p: (p.k, p.source, p.center),
    )
    lead = progs[LEADER]
    extras = {"dprime": lead.setup.dprime, "center_count": lead.count}
    if cl.centers:
        extras.update(
            wbfs_states=[p.wbfs for p in progs],
            wbfs_start=lead.p3,
            wbfs_rounds=lead.rw,
            phase_starts={"setup": 3, "wbfs": lead.p3, "report": lead.p4, "order": lead.p5, "buy": lead.p6},
        )
        if config.record_trace:
            extras["wbfs_trace"] = _slice_trace(trace, lead.p3, lead.rw)
    result = SpannerResult(edges, provenance, cl, params, seed, "distributed", samples, purchases,
                           rounds=trace.rounds_executed, extras=extras)
    return result, trace


def _slice_trace(trace: Trace, start: int, length: int) -> Trace:
    """The WBFS window of a full trace, renumbered from round 1."""
    sub = Trace(n=trace.n, budget_bits=trace.budget_bits)
    for rec in trace.rounds:
        local = rec.round - start + 1
        if 1 <= local <= length:
            sub.rounds.append(RoundRecord(
                local,
                [(a, b, m) for a, b, m in rec.messages if isinstance(m, Triplet)],
                rec.events,
            ))
            sub.rounds_executed = local
        elif local < 1 and rec.events:
            for node, evs in rec.events.items():
                sub.initial_events.setdefault(node, []).extend(evs)
    sub.message_count = sum(len(r.messages) for r in sub.rounds)
    return sub


# -- shape checks -------------------------------------------------------------

def size_scale(n: int) -> float:
    """``n^(4/3) * ln^(4/3) n``, the edge-count scale of the construction."""
    return n ** (4 / 3) * math.log(n) ** (4 / 3)


def round_scale(n: int) -> float:
    """``n^(2/3) / ln^(1/3) n``, the round-count scale besides the diameter term."""
    return n ** (2 / 3) / math.log(n) ** (1 / 3)


def fit_round_bound(points: Iterable[tuple[int, int, int]]) -> tuple[float, float]:
    """Smallest envelope ``a * round_scale(n) + b * D`` covering all ``(n, D, rounds)``.

    Minimizes the summed bound subject to covering every point, ``a, b >= 0``.
    """
    from scipy.optimize import linprog

    pts = list(points)
    if not pts:
        raise ValueError("need at least one (n, D, rounds) point")
    xs = [round_scale(n) for n, _, _ in pts]
    ds = [float(D) for _, D, _ in pts]
    res = linprog(
        c=[sum(xs), sum(ds)],
        A_ub=[[-x, -d] for x, d in zip(xs, ds)],
        b_ub=[-float(r) for _, _, r in pts],
        bounds=[(0, None), (0, None)],
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"round-bound fit failed: {res.message}")
    a, b = (float(v) for v in res.x)
    # the LP solution sits on the constraints; round up so every point is covered exactly
    a, b = math.ceil(a * 1e6) / 1e6, math.ceil(b * 1e6) / 1e6
    return a, b
