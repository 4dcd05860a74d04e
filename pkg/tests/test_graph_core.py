import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from congest_spanner import (
    Graph,
    GraphError,
    Path,
    assign_random_weights,
    bfs_distances,
    diameter,
    generate_graph,
    load_edge_list,
    sequential_wbfs_tree,
    write_edge_list,
)
from congest_spanner.verify import check_wbfs_tree

from conftest import brute_lex, diamond, random_weighted, simple_paths, triangle


def floyd_warshall(g):
    """Plain-Python hop distances, independent of every library routine."""
    inf = float("inf")
    d = [[0 if i == j else inf for j in range(g.n)] for i in range(g.n)]
    for u, v, _ in g.edges():
        d[u][v] = d[v][u] = 1
    for k in range(g.n):
        for i in range(g.n):
            for j in range(g.n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


# -- Graph invariants ----------------------------------------------------------

@pytest.mark.parametrize(
    "n, edges, msg",
    [
        (3, [(0, 0, 1), (0, 1, 1), (1, 2, 1)], "self-loop"),
        (3, [(0, 1, 1), (1, 0, 2), (1, 2, 1)], "parallel"),
        (3, [(0, 1, -1), (1, 2, 1)], "negative"),
        (3, [(0, 1, 1), (1, 3, 1)], "outside"),
        (4, [(0, 1, 1), (2, 3, 1)], "not connected"),
        (1, [], "at least 2"),
    ],
)
def test_graph_rejects_invalid(n, edges, msg):
    with pytest.raises(GraphError, match=msg):
        Graph(n, edges)


def test_graph_weight_bound():
    with pytest.raises(GraphError, match="exceeds n"):
        Graph(2, [(0, 1, 1)], max_weight=2**5 + 1)
    with pytest.raises(GraphError, match="declared bound"):
        Graph(3, [(0, 1, 9), (1, 2, 1)], max_weight=5)


def test_adjacency_symmetric_and_sorted():
    g = diamond()
    for v in range(g.n):
        assert list(g.adj[v]) == sorted(g.adj[v])
        for u, w in g.adj[v]:
            assert g.weight(u, v) == w
    assert g.m == 4
    assert list(g.edges()) == [(0, 1, 3), (0, 2, 1), (1, 3, 1), (2, 3, 1)]


def test_path_type():
    g = diamond()
    p = Path((0, 2, 3))
    assert p.length == 2
    assert p.weight(g) == 2
    with pytest.raises(GraphError):
        Path((0, 1, 0))
    with pytest.raises(GraphError):
        Path((0, 3)).weight(g)


# -- generators ----------------------------------------------------------------

def test_generate_path():
    g = generate_graph("path", n=5, seed=0)
    assert list(g.edges()) == [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1)]


def test_generate_complete():
    g = generate_graph("complete", n=4)
    assert g.m == 6
    assert diameter(g) == 1


def test_generate_gnp_deterministic():
    a = generate_graph("gnp", n=50, p=0.2, seed=7)
    b = generate_graph("gnp", n=50, p=0.2, seed=7)
    assert a.edge_set() == b.edge_set()
    assert 0 <= a.m <= 1225


def test_generate_gnp_repair_recorded():
    g = generate_graph("gnp", n=40, p=0.01, seed=3)
    assert g.meta["repaired_edges"] > 0
    dense = generate_graph("gnp", n=20, p=1.0, seed=3)
    assert dense.meta["repaired_edges"] == 0
    assert dense.m == 190


def test_generate_other_kinds():
    assert generate_graph("cycle", n=6).m == 6
    assert generate_graph("star", n=6).degree(0) == 5
    grid = generate_graph("grid", rows=3, cols=4)
    assert grid.n == 12 and grid.m == 17 and diameter(grid) == 5


@pytest.mark.parametrize("kind, params", [("path", {"n": 1}), ("gnp", {"n": 10, "p": 0.0}), ("gnp", {"n": 10, "p": 1.5})])
def test_generate_rejects(kind, params):
    with pytest.raises(GraphError):
        generate_graph(kind, params)


def test_generate_unknown_kind():
    with pytest.raises(GraphError):
        generate_graph("hypercube", n=8)


# -- weights -------------------------------------------------------------------

def test_weights_degenerate_range():
    g = assign_random_weights(generate_graph("gnp", n=30, p=0.2, seed=1), 1, seed=4)
    assert {w for _, _, w in g.edges()} == {1}


def test_weights_p3_deterministic():
    p3 = generate_graph("path", n=3)
    a = assign_random_weights(p3, 100, seed=1)
    b = assign_random_weights(p3, 100, seed=1)
    assert list(a.edges()) == list(b.edges())
    assert all(1 <= w <= 100 for _, _, w in a.edges())
    assert a.edge_set() == p3.edge_set()


def test_weights_reject_nonpositive():
    with pytest.raises(GraphError):
        assign_random_weights(generate_graph("path", n=3), 0, seed=1)


def test_weights_k4_unique_lightest_shortest():
    g = assign_random_weights(generate_graph("complete", n=4), 64, seed=3)
    assert list(g.edges()) == [(0, 1, 31), (0, 2, 17), (0, 3, 48), (1, 2, 61), (1, 3, 9), (2, 3, 2)]
    for s in range(4):
        for t in range(s + 1, 4):
            ps = simple_paths(g, s, t)
            length = min(len(p) for p in ps)
            shortest = [p for p in ps if len(p) == length]
            weights = sorted(sum(g.weight(a, b) for a, b in zip(p, p[1:])) for p in shortest)
            assert len(weights) == 1 or weights[0] < weights[1]


# -- distances -----------------------------------------------------------------

def test_bfs_path():
    assert bfs_distances(generate_graph("path", n=5), 0) == {0: 0, 1: 1, 2: 2, 3: 3, 4: 4}


def test_bfs_complete():
    d = bfs_distances(generate_graph("complete", n=4), 2)
    assert d == {0: 1, 1: 1, 2: 0, 3: 1}


def test_bfs_matches_floyd_warshall():
    g = generate_graph("gnp", n=50, p=0.2, seed=7)
    fw = floyd_warshall(g)
    assert bfs_distances(g, 0) == {v: fw[0][v] for v in range(50)}


def test_diameters():
    assert diameter(generate_graph("path", n=5)) == 4
    assert diameter(generate_graph("complete", n=4)) == 1
    c9 = generate_graph("cycle", n=9)
    assert diameter(c9) == max(max(row) for row in floyd_warshall(c9)) == 4


# -- sequential WBFS -----------------------------------------------------------

def test_wbfs_triangle_shortest_beats_lighter():
    t = sequential_wbfs_tree(triangle(), 0)
    assert (t.dist[2], t.weight[2], t.parent[2]) == (1, 5, 0)
    assert brute_lex(triangle(), 0, 2) == (1, 5)


def test_wbfs_diamond_lightest_of_two():
    g = diamond()
    t = sequential_wbfs_tree(g, 0)
    assert (t.dist[3], t.weight[3], t.parent[3]) == (2, 2, 2)
    assert brute_lex(g, 0, 3) == (2, 2)


def test_wbfs_root():
    t = sequential_wbfs_tree(diamond(), 1)
    assert t.dist[1] == 0 and t.weight[1] == 0 and t.parent[1] is None
    assert t.path_to(2).nodes == (1, 0, 2) or t.path_to(2).nodes == (1, 3, 2)


def test_wbfs_parent_tie_break_smallest_id():
    g = Graph(4, [(0, 1, 1), (0, 2, 1), (1, 3, 2), (2, 3, 2)])
    assert sequential_wbfs_tree(g, 0).parent[3] == 1


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 9), p=st.floats(0.2, 1.0), seed=st.integers(0, 10**6))
def test_wbfs_small_graphs_exhaustive(n, p, seed):
    g = random_weighted(n, p, n, seed)
    for s in range(n):
        t = sequential_wbfs_tree(g, s)
        for v in range(n):
            assert (t.dist[v], t.weight[v]) == brute_lex(g, s, v)
            if v != s:
                u = t.parent[v]
                assert t.dist[v] == t.dist[u] + 1
                assert t.weight[v] == t.weight[u] + g.weight(u, v)


def test_wbfs_random_graphs_against_lex_search():
    rng = random.Random(5)
    for i in range(30):
        n = rng.randint(13, 200)
        g = random_weighted(n, min(1.0, 4 / n), n, 1000 + i)
        s = rng.randrange(n)
        assert check_wbfs_tree(g, sequential_wbfs_tree(g, s)) == []


def test_distances_weight_invariant():
    base = generate_graph("gnp", n=40, p=0.1, seed=2)
    for seed in range(5):
        g = assign_random_weights(base, 40, seed=seed)
        assert sequential_wbfs_tree(g, 0).dist == bfs_distances(base, 0)


# -- edge-list files -----------------------------------------------------------

def test_edge_list_roundtrip(tmp_path):
    g = assign_random_weights(generate_graph("gnp", n=20, p=0.3, seed=1), 50, seed=2)
    path = tmp_path / "g.txt"
    write_edge_list(g, path, comment="fixture")
    assert load_edge_list(path) == g
    assert load_edge_list(io.StringIO(write_edge_list(g)).read().splitlines()) == g


@pytest.mark.parametrize(
    "text, line",
    [
        ("3 2 5\n0 1 1\n1 1 2\n", 3),
        ("3 2 5\n0 1 1\n1 2 9\n", 3),
        ("3 2 5\n0 1 1\n", 1),
        ("3 x 5\n", 1),
        ("# header\n3 2 5\n0 1 1\n2 1 1\n", 4),
        ("3 2 5\n0 1 1\n0 1 2\n", 3),
    ],
)
def test_edge_list_errors_have_line_numbers(text, line):
    with pytest.raises(GraphError, match=f"line {line}"):
        load_edge_list(text.splitlines())
