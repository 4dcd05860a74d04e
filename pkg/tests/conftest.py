import itertools
import random

import pytest

from congest_spanner import Graph, generate_graph

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  {detail}".rstrip())


def triangle() -> Graph:
    return Graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 5)])


def diamond() -> Graph:
    return Graph(4, [(0, 1, 3), (0, 2, 1), (1, 3, 1), (2, 3, 1)])


def simple_paths(g: Graph, s: int, t: int) -> list[tuple[int, ...]]:
    """Every simple s-t path, by trying all orderings of intermediate nodes."""
    if s == t:
        return [(s,)]
    others = [v for v in range(g.n) if v not in (s, t)]
    found = []
    for r in range(len(others) + 1):
        for mid in itertools.permutations(others, r):
            p = (s, *mid, t)
            if all(g.has_edge(a, b) for a, b in zip(p, p[1:])):
                found.append(p)
    return found


def path_weight(g: Graph, p) -> int:
    return sum(g.weight(a, b) for a, b in zip(p, p[1:]))


def brute_lex(g: Graph, s: int, t: int) -> tuple[int, int]:
    """(hop distance, lightest weight among shortest) by full path enumeration."""
    ps = simple_paths(g, s, t)
    length = min(len(p) for p in ps) - 1
    return length, min(path_weight(g, p) for p in ps if len(p) - 1 == length)


def random_weighted(n: int, p: float, max_w: int, seed: int, zero_ok: bool = True) -> Graph:
    """gnp topology with weights uniform in 0..max_w (or 1..max_w)."""
    g = generate_graph("gnp", n=n, p=p, seed=seed)
    rng = random.Random(seed * 7919 + 1)
    lo = 0 if zero_ok else 1
    return g.reweighted(lambda u, v: rng.randint(lo, max_w), max_weight=max_w)


@pytest.fixture
def rng():
    return random.Random(12345)

