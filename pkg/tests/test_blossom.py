import networkx as nx
import numpy as np
import pytest

from lsteleport.blossom import max_weight_matching, min_weight_perfect_matching


def random_graph(rng, n, negative=False):
    m = int(rng.integers(1, n * (n - 1) // 2 + 1))
    pairs = set()
    while len(pairs) < m:
        a, b = rng.integers(0, n, 2)
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    pairs = sorted(pairs)
    ei = np.array([p[0] for p in pairs], dtype=np.int64)
    ej = np.array([p[1] for p in pairs], dtype=np.int64)
    ew = rng.integers(-3 if negative else 1, 20, len(pairs)).astype(np.int64)
    return ei, ej, ew


def as_nx(ei, ej, ew):
    g = nx.Graph()
    for a, b, w in zip(ei, ej, ew):
        g.add_edge(int(a), int(b), weight=int(w))
    return g


def check_mate(n, mate, ei, ej):
    edges = set(zip(ei.tolist(), ej.tolist()))
    for v in range(n):
        if mate[v] >= 0:
            assert mate[mate[v]] == v
            assert (min(v, mate[v]), max(v, mate[v])) in edges


@pytest.mark.parametrize("maxcard", [False, True])
def test_matches_networkx(maxcard):
    rng = np.random.default_rng(0)
    for trial in range(600):
        n = int(rng.integers(2, 14))
        ei, ej, ew = random_graph(rng, n, negative=trial % 3 == 0)
        mate = max_weight_matching(n, ei, ej, ew, maxcard)
        check_mate(n, mate, ei, ej)
        g = as_nx(ei, ej, ew)
        ref = nx.max_weight_matching(g, maxcardinality=maxcard)
        w = {(a, b): x for a, b, x in zip(ei.tolist(), ej.tolist(), ew.tolist())}
        mine = [(v, int(mate[v])) for v in range(n) if mate[v] > v]
        assert sum(w[e] for e in mine) == sum(g[a][b]["weight"] for a, b in ref)
        if maxcard:
            assert len(mine) == len(ref)


def test_min_weight_perfect_matching():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = 2 * int(rng.integers(1, 7))
        ei, ej, ew = random_graph(rng, n)
        mate = min_weight_perfect_matching(n, ei, ej, ew)
        g = as_nx(ei, ej, ew)
        ref = nx.min_weight_matching(g)
        perfect = len(ref) * 2 == n and g.number_of_nodes() == n
        if not perfect:
            assert (mate == -1).all()
            continue
        check_mate(n, mate, ei, ej)
        w = {(a, b): x for a, b, x in zip(ei.tolist(), ej.tolist(), ew.tolist())}
        mine = sum(w[(v, int(mate[v]))] for v in range(n) if mate[v] > v)
        assert mine == sum(g[a][b]["weight"] for a, b in ref)


def test_trivial_cases():
    empty = np.zeros(0, np.int64)
    assert (min_weight_perfect_matching(4, empty, empty, empty) == -1).all()
    mate = max_weight_matching(2, np.array([0]), np.array([1]), np.array([5]), False)
    assert list(mate) == [1, 0]
    # a negative edge is left out unless cardinality is forced
    mate = max_weight_matching(2, np.array([0]), np.array([1]), np.array([-5]), False)
    assert list(mate) == [-1, -1]
    mate = max_weight_matching(2, np.array([0]), np.array([1]), np.array([-5]), True)
    assert list(mate) == [1, 0]


def test_odd_cycle_needs_blossom():
    # triangle plus pendant: the optimum shrinks the triangle
    ei = np.array([0, 1, 0, 2], dtype=np.int64)
    ej = np.array([1, 2, 2, 3], dtype=np.int64)
    ew = np.array([6, 6, 6, 5], dtype=np.int64)
    mate = max_weight_matching(4, ei, ej, ew, False)
    assert sorted((v, int(mate[v])) for v in range(4) if mate[v] > v) in ([(0, 1), (2, 3)],)
