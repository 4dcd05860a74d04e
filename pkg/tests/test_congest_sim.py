import json
import math

import pytest

from congest_spanner import (
    Announce,
    BandwidthViolation,
    Buy,
    NodeProgram,
    NonDeterminismGuard,
    Report,
    SimConfig,
    Triplet,
    bits_per_message,
    generate_graph,
    run_simulation,
    run_wbfs,
)
from congest_spanner.congest_sim import AnnounceTag, bit_size, node_seed
from congest_spanner.wbfs import last_change_round

from conftest import random_weighted


class AnnounceOnce(NodeProgram):
    def __init__(self):
        self.heard = []

    def outgoing(self, r):
        return Announce(AnnounceTag.CENTER, 1) if r == 1 else None

    def receive(self, r, sender, msg):
        self.heard.append((r, sender, msg.value))


class Loud(NodeProgram):
    def outgoing(self, r):
        return Buy(10**9)


_AMBIENT = [0]


class Flaky(NodeProgram):
    """Reads shared mutable state, so a replay sees a different value."""

    def outgoing(self, r):
        _AMBIENT[0] += 1
        return Buy(_AMBIENT[0] % 2)


class RandomTalker(NodeProgram):
    """Sends a seeded random value to one neighbor per round."""

    def __init__(self, nbrs):
        self.nbrs = nbrs
        self.log = []

    def outgoing(self, r):
        u = self.rng.choice(self.nbrs)
        return {u: Report(r, self.node, self.rng.randrange(8))}

    def receive(self, r, sender, msg):
        self.log.append((r, sender, msg.missing))


def test_zero_rounds_empty_trace():
    g = generate_graph("path", n=4)
    progs, trace = run_simulation(g, lambda v: AnnounceOnce(), SimConfig(max_rounds=0))
    assert trace.rounds_executed == 0 and trace.rounds == [] and trace.message_count == 0
    assert all(p.heard == [] for p in progs)


def test_p2_announce_two_messages():
    g = generate_graph("path", n=2)
    progs, trace = run_simulation(g, lambda v: AnnounceOnce(), SimConfig(max_rounds=3))
    assert trace.messages_per_round == [2, 0, 0]
    assert sorted((a, b) for a, b, _ in trace.rounds[0].messages) == [(0, 1), (1, 0)]
    assert progs[0].heard == [(1, 1, 1)] and progs[1].heard == [(1, 0, 1)]


def test_wbfs_p5_stabilizes_within_four_rounds():
    g = generate_graph("path", n=5)
    _, trace = run_wbfs(g, [0], rounds=10, record_trace=True)
    assert last_change_round(trace) <= 4


def test_bits_per_message_examples():
    # formula 2*ceil(log2(n+1)) + ceil(log2(nW+1)) + 4 at n=2, W=0 gives 2*2 + 0 + 4
    assert bits_per_message(2, 0) == 8
    assert bits_per_message(16, 1) == 19


def _ceil_log2(x):
    """Smallest e with 2**e >= x, by repeated doubling."""
    e, p = 0, 1
    while p < x:
        p *= 2
        e += 1
    return e


def test_bits_per_message_independent_formula():
    for n, W in [(1024, 1024**3), (2, 0), (16, 1), (3, 7), (1000, 999), (255, 1)]:
        assert bits_per_message(n, W) == 2 * _ceil_log2(n + 1) + _ceil_log2(n * W + 1) + 4


def test_bits_per_message_rejects():
    with pytest.raises(ValueError):
        bits_per_message(1, 0)
    with pytest.raises(ValueError):
        bits_per_message(4, -1)


def test_bit_size_fits_triplet_bounds():
    for n, W in [(2, 0), (16, 1), (100, 100**3)]:
        worst = Triplet(n, n - 1, n * W)
        assert bit_size(worst) <= bits_per_message(n, W)


def test_bandwidth_violation():
    g = generate_graph("path", n=3)
    with pytest.raises(BandwidthViolation) as exc:
        run_simulation(g, lambda v: Loud(), SimConfig(max_rounds=2))
    assert exc.value.round == 1 and exc.value.bits > exc.value.budget
    _, trace = run_simulation(g, lambda v: Loud(), SimConfig(max_rounds=2, bandwidth_check=False))
    assert trace.message_count == 8


def test_nondeterminism_guard():
    g = generate_graph("path", n=3)
    with pytest.raises(NonDeterminismGuard):
        run_simulation(g, lambda v: Flaky(), SimConfig(max_rounds=2, debug_replay=True))
    run_simulation(g, lambda v: AnnounceOnce(), SimConfig(max_rounds=2, debug_replay=True))


def test_node_seeds_distinct_and_stable():
    seeds = [node_seed(7, v) for v in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [node_seed(7, v) for v in range(100)]
    assert seeds != [node_seed(8, v) for v in range(100)]


def _dump(trace):
    return "\n".join(json.dumps(r) for r in trace.jsonl_records())


def test_replay_determinism_and_threads():
    g = generate_graph("gnp", n=40, p=0.15, seed=2)
    runs = []
    for threads in (1, 1, 4):
        progs, trace = run_simulation(
            g, lambda v: RandomTalker(g.neighbors(v)), SimConfig(max_rounds=6, global_seed=9, threads=threads)
        )
        runs.append((_dump(trace), [p.log for p in progs]))
    assert runs[0] == runs[1] == runs[2]


def test_wbfs_threads_identical():
    g = random_weighted(60, 0.1, 60, seed=4)
    a, ta = run_wbfs(g, range(0, 60, 7), record_trace=True)
    b, tb = run_wbfs(g, range(0, 60, 7), record_trace=True, threads=4)
    assert _dump(ta) == _dump(tb)
    assert [s.order for s in a] == [s.order for s in b]


def test_send_before_receive():
    order = []

    class Probe(NodeProgram):
        def outgoing(self, r):
            order.append(("send", r))
            return Announce(AnnounceTag.COUNT, r)

        def receive(self, r, sender, msg):
            order.append(("recv", r))

    run_simulation(generate_graph("cycle", n=5), lambda v: Probe(), SimConfig(max_rounds=3))
    for r in (1, 2, 3):
        idx = [i for i, (kind, rr) in enumerate(order) if rr == r]
        kinds = [order[i][0] for i in idx]
        assert kinds == ["send"] * 5 + ["recv"] * 10


def test_halting_stops_early():
    class Once(NodeProgram):
        done = False

        def outgoing(self, r):
            self.done = True
            return None

        def halted(self):
            return self.done

    _, trace = run_simulation(generate_graph("path", n=3), lambda v: Once(), SimConfig(max_rounds=50))
    assert trace.rounds_executed == 1


def test_non_neighbor_rejected():
    class Stray(NodeProgram):
        def outgoing(self, r):
            return {(self.node + 2) % 4: Buy(0)}

    from congest_spanner.congest_sim import SimulationError

    with pytest.raises(SimulationError, match="non-neighbor"):
        run_simulation(generate_graph("path", n=4), lambda v: Stray(), SimConfig(max_rounds=1))


def test_jsonl_export(tmp_path):
    g = generate_graph("path", n=3)
    _, trace = run_wbfs(g, [0], record_trace=True)
    path = tmp_path / "t.jsonl"
    trace.write_jsonl(path)
    recs = [json.loads(line) for line in path.read_text().splitlines()]
    msgs = [r for r in recs if r["kind"] == "triplet"]
    assert msgs[0] == {"round": 1, "from": 0, "to": 1, "kind": "triplet", "d": 0, "s": 0, "w": 0}
    summaries = [r for r in recs if r["kind"] == "summary"]
    assert [s["round"] for s in summaries] == [1, 2]
    assert sum(s["messages"] for s in summaries) == trace.message_count
    assert all(list(r)[:2] == ["round", "kind"] or list(r)[:3] == ["round", "from", "to"] for r in recs)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(max_rounds=-1)
    with pytest.raises(ValueError):
        SimConfig(max_rounds=1, delivery_order="random")


def test_max_bits_tracked():
    g = random_weighted(30, 0.2, 30, seed=1)
    _, trace = run_wbfs(g, range(30))
    assert 0 < trace.max_bits <= trace.budget_bits == bits_per_message(30, 30)
    assert not math.isnan(trace.max_bits)
