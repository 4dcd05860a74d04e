"""Round-synchronous CONGEST engine.

Each round every node first produces its outgoing messages (at most one per
incident directed edge), the engine checks them against the bit budget, and
then delivers them.  Receivers see senders in ascending id order unless
``SimConfig.delivery_order`` says otherwise.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable, Union

from .graph_core import Graph

__all__ = [
    "Triplet",
    "Buy",
    "Announce",
    "AnnounceTag",
    "Report",
    "Message",
    "bit_size",
    "bits_per_message",
    "derive_seed",
    "node_seed",
    "NodeProgram",
    "SimConfig",
    "RoundRecord",
    "Trace",
    "SimulationError",
    "BandwidthViolation",
    "NonDeterminismGuard",
    "run_simulation",
]

KIND_TAG_BITS = 4


class AnnounceTag(IntEnum):
    CENTER = 0
    JOIN = 1
    UNCLUSTERED = 2
    BFS = 3
    DEPTH = 4
    COUNT = 5
    DPRIME = 6
    CCOUNT = 7


@dataclass(frozen=True, order=True, slots=True)
class Triplet:
    d: int
    s: int
    w: int

    kind = "triplet"


@dataclass(frozen=True, slots=True)
class Buy:
    s: int

    kind = "buy"


@dataclass(frozen=True, slots=True)
class Announce:
    tag: int
    value: int = 0

    kind = "announce"


@dataclass(frozen=True, slots=True)
class Report:
    d: int
    s: int
    missing: int

    kind = "report"


Message = Union[Triplet, Buy, Announce, Report]

_FIELDS = {
    Triplet: ("d", "s", "w"),
    Buy: ("s",),
    Announce: ("tag", "value"),
    Report: ("d", "s", "missing"),
}


def message_fields(msg: Message) -> dict[str, int]:
    return {name: int(getattr(msg, name)) for name in _FIELDS[type(msg)]}


def bit_size(msg: Message) -> int:
    """Kind tag plus the binary length of every field value."""
    total = KIND_TAG_BITS
    for name in _FIELDS[type(msg)]:
        value = int(getattr(msg, name))
        if value < 0:
            raise ValueError(f"negative field {name}={value} in {msg!r}")
        total += value.bit_length()
    return total


def bits_per_message(n: int, W: int) -> int:
    """Budget B = 2*ceil(log2(n+1)) + ceil(log2(n*W+1)) + 4."""
    if n < 2 or W < 0:
        raise ValueError(f"need n >= 2 and W >= 0, got n={n} W={W}")
    # ceil(log2(x + 1)) == x.bit_length() for x >= 0
    return 2 * n.bit_length() + (n * W).bit_length() + KIND_TAG_BITS


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from an arbitrary tuple of ints/strings."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def node_seed(global_seed: int, node: int) -> int:
    return derive_seed("node", global_seed, node)


class NodeProgram:
    """Behavioral contract for the per-node state machine.

    The engine sets ``node``, ``seed``, ``rng`` and ``record_events`` before
    round 1.  ``outgoing`` returns either a mapping neighbor -> message, a
    single message (sent to every neighbor), or ``None``.
    """

    node: int = -1
    seed: int = 0
    rng: random.Random | None = None
    record_events: bool = False

    def outgoing(self, round: int):
        return None

    def receive(self, round: int, sender: int, message: Message) -> None:
        pass

    def end_round(self, round: int) -> None:
        pass

    def halted(self) -> bool:
        return False

    def drain_events(self) -> list[dict]:
        return []


@dataclass
class SimConfig:
    max_rounds: int
    bandwidth_check: bool = True
    record_trace: bool = True
    global_seed: int = 0
    delivery_order: str = "ascending"
    debug_replay: bool = False
    threads: int = field(default_factory=lambda: int(os.environ.get("CONGEST_SIM_THREADS", "1")))

    def __post_init__(self) -> None:
        if self.max_rounds < 0:
            raise ValueError(f"max_rounds must be >= 0, got {self.max_rounds}")
        if self.delivery_order not in ("ascending", "descending"):
            raise ValueError(f"unknown delivery order {self.delivery_order!r}")
        self.threads = max(1, int(self.threads))


@dataclass
class RoundRecord:
    round: int
    messages: list[tuple[int, int, Message]] = field(default_factory=list)
    events: dict[int, list[dict]] = field(default_factory=dict)


@dataclass
class Trace:
    n: int = 0
    budget_bits: int = 0
    rounds_executed: int = 0
    message_count: int = 0
    max_bits: int = 0
    messages_per_round: list[int] = field(default_factory=list)
    rounds: list[RoundRecord] = field(default_factory=list)
    initial_events: dict[int, list[dict]] = field(default_factory=dict)

    def all_events(self) -> Iterable[tuple[int, dict]]:
        """``(node, event)`` pairs in recording order, setup events first."""
        for node, evs in sorted(self.initial_events.items()):
            for ev in evs:
                yield node, ev
        for rec in self.rounds:
            for node, evs in sorted(rec.events.items()):
                for ev in evs:
                    yield node, ev

    def jsonl_records(self) -> Iterable[dict]:
        for node, ev in sorted(self.initial_events.items()):
            for e in ev:
                yield {"round": 0, "kind": "state", "node": node, **_jsonable(e)}
        for rec in self.rounds:
            for src, dst, msg in rec.messages:
                yield {"round": rec.round, "from": src, "to": dst, "kind": msg.kind, **message_fields(msg)}
            for node, evs in sorted(rec.events.items()):
                for e in evs:
                    yield {"round": rec.round, "kind": "state", "node": node, **_jsonable(e)}
            yield {
                "round": rec.round,
                "kind": "summary",
                "messages": len(rec.messages),
                "state_changes": sum(len(v) for v in rec.events.values()),
            }

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.jsonl_records():
                fh.write(json.dumps(record) + "\n")


def _jsonable(ev: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in ev.items()}


class SimulationError(RuntimeError):
    pass


class BandwidthViolation(SimulationError):
    def __init__(self, round: int, edge: tuple[int, int], bits: int, budget: int) -> None:
        super().__init__(f"round {round}: message on edge {edge} has {bits} bits > budget {budget}")
        self.round, self.edge, self.bits, self.budget = round, edge, bits, budget


class NonDeterminismGuard(SimulationError):
    def __init__(self, round: int, node: int) -> None:
        super().__init__(f"round {round}: node {node} produced different output on replay")
        self.round, self.node = round, node


def _expand(out, nbrs: list[int]) -> dict[int, Message]:
    if out is None:
        return {}
    if isinstance(out, dict):
        return {k: m for k, m in out.items() if m is not None}
    return {u: out for u in nbrs}


def run_simulation(
    g: Graph,
    program_factory: Callable[[int], NodeProgram],
    config: SimConfig,
) -> tuple[list[NodeProgram], Trace]:
    """Run up to ``config.max_rounds`` rounds, stopping early once every program halts."""
    n = g.n
    nbrs = [g.neighbors(v) for v in range(n)]
    nbr_sets = [set(x) for x in nbrs]
    budget = bits_per_message(n, g.max_weight)
    programs = [program_factory(v) for v in range(n)]
    for v, prog in enumerate(programs):
        prog.node = v
        prog.seed = node_seed(config.global_seed, v)
        prog.rng = random.Random(prog.seed)
        prog.record_events = config.record_trace

    trace = Trace(n=n, budget_bits=budget)
    if config.record_trace:
        trace.initial_events = {v: evs for v, p in enumerate(programs) if (evs := p.drain_events())}

    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    run_map = pool.map if pool else map
    order = range(n) if config.delivery_order == "ascending" else range(n - 1, -1, -1)

    def send(v: int):
        prog = programs[v]
        if prog.halted():
            return {}
        if config.debug_replay:
            twin = copy.deepcopy(prog)
            out = _expand(prog.outgoing(r), nbrs[v])
            if _expand(twin.outgoing(r), nbrs[v]) != out:
                raise NonDeterminismGuard(r, v)
            return out
        return _expand(prog.outgoing(r), nbrs[v])

    def deliver(v: int):
        prog = programs[v]
        for sender, msg in inbox[v]:
            prog.receive(r, sender, msg)

    try:
        for r in range(1, config.max_rounds + 1):
            if all(p.halted() for p in programs):
                break
            outs = list(run_map(send, range(n)))

            inbox: list[list[tuple[int, Message]]] = [[] for _ in range(n)]
            record = RoundRecord(r) if config.record_trace else None
            sizes: dict[int, int] = {}
            count = 0
            for v in order:
                for u, msg in sorted(outs[v].items()):
                    if u not in nbr_sets[v]:
                        raise SimulationError(f"round {r}: node {v} addressed non-neighbor {u}")
                    key = id(msg)
                    bits = sizes.get(key)
                    if bits is None:
                        bits = sizes[key] = bit_size(msg)
                    if config.bandwidth_check and bits > budget:
                        raise BandwidthViolation(r, (v, u), bits, budget)
                    trace.max_bits = max(trace.max_bits, bits)
                    inbox[u].append((v, msg))
                    count += 1
                    if record is not None:
                        record.messages.append((v, u, msg))

            list(run_map(deliver, range(n)))
            for prog in programs:
                prog.end_round(r)

            trace.rounds_executed = r
            trace.message_count += count
            trace.messages_per_round.append(count)
            if record is not None:
                record.events = {v: evs for v, p in enumerate(programs) if (evs := p.drain_events())}
                trace.rounds.append(record)
    finally:
        if pool is not None:
            pool.shutdown()
    return programs, trace
