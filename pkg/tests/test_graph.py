import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from arw.graph import (
    Graph,
    GraphError,
    complete_graph,
    cycle_graph,
    diameter,
    distances_from,
    grid_graph,
    load_graph,
    max_degree,
    parse_graph_spec,
    path_graph,
    star_graph,
)


def csgraph_distances(g):
    A = np.zeros((g.k, g.k))
    for i, j in g.edges:
        A[i, j] = A[j, i] = 1
    return shortest_path(csr_matrix(A), unweighted=True, directed=False)


@st.composite
def connected_graphs(draw, max_k=9):
    k = draw(st.integers(1, max_k))
    # random spanning tree plus extra edges
    edges = {(draw(st.integers(0, v - 1)), v) for v in range(1, k)}
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    if pairs:
        edges |= set(draw(st.lists(st.sampled_from(pairs), max_size=len(pairs))))
    return Graph.from_edges(k, sorted(edges))


def test_load_k2():
    g = load_graph("2\n0 1")
    assert g.k == 2 and g.edges == [(0, 1)]


def test_load_path4():
    g = load_graph("4\n0 1\n1 2\n2 3")
    assert g == path_graph(4)


def test_load_self_loop_rejected():
    with pytest.raises(GraphError, match="self-loop"):
        load_graph("3\n0 1\n0 2\n1 1")


@pytest.mark.parametrize(
    "text, msg",
    [
        ("", "empty"),
        ("x\n0 1", "header"),
        ("3\n0 1", "disconnected"),
        ("2\n0 2", "out of range"),
        ("2\n0 1 2", "malformed"),
        ("2\n0 a", "malformed"),
        ("3\n0 1\n1 0\n1 2", "duplicate"),
    ],
)
def test_load_errors(text, msg):
    with pytest.raises(GraphError, match=msg):
        load_graph(text)


def test_load_collapse_duplicates_and_comments():
    g = load_graph("# triangle\n3\n0 1\n1 0  # again\n\n1 2\n2 0", collapse_duplicates=True)
    assert g == complete_graph(3)


def test_builders_match_examples():
    g = complete_graph(3)
    assert len(g.edges) == 3 and max_degree(g) == 2 and diameter(g) == 1
    g = grid_graph(8, 8)
    assert g.k == 64 and len(g.edges) == 112 and g.diameter == 14
    g = path_graph(4)
    assert g.max_degree == 2 and g.diameter == 3
    g = grid_graph(2, 3)
    assert g.diameter == 3 and g.max_degree == 3
    assert star_graph(5).max_degree == 4 and star_graph(5).diameter == 2
    assert cycle_graph(6).diameter == 3 and len(cycle_graph(6).edges) == 6


def test_distances_examples():
    assert list(distances_from(complete_graph(2), 0)) == [0, 1]
    assert list(distances_from(path_graph(4), 0)) == [0, 1, 2, 3]


def test_complete_flag():
    assert complete_graph(4).is_complete()
    assert not path_graph(3).is_complete()


@pytest.mark.parametrize(
    "spec, k, m",
    [("complete:4", 4, 6), ("path:5", 5, 4), ("cycle:5", 5, 5), ("star:4", 4, 3), ("grid:2x3", 6, 7)],
)
def test_parse_spec(spec, k, m):
    g = parse_graph_spec(spec)
    assert g.k == k and len(g.edges) == m


def test_parse_spec_file(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("3\n0 1\n1 2\n")
    assert parse_graph_spec(f"file:{p}") == path_graph(3)


@pytest.mark.parametrize("spec", ["wheel:4", "complete:x", "grid:3"])
def test_parse_spec_errors(spec):
    with pytest.raises(GraphError):
        parse_graph_spec(spec)


def test_constructor_rejects_asymmetric():
    with pytest.raises(GraphError, match="symmetric"):
        Graph(2, ((1,), ()))


@given(connected_graphs())
def test_distance_invariants(g):
    ref = csgraph_distances(g)
    assert np.array_equal(g.distances, ref.astype(np.int64))
    for u in range(g.k):
        d = distances_from(g, u)
        assert d[u] == 0
        for a, b in g.edges:
            assert abs(d[a] - d[b]) <= 1
    assert g.diameter == max(distances_from(g, u).max() for u in range(g.k))


@given(connected_graphs())
def test_adjacency_symmetry(g):
    for i, nb in enumerate(g.adjacency):
        for j in nb:
            assert i in g.adjacency[j]
    indptr, indices = g.csr
    assert indptr[-1] == 2 * len(g.edges)
    for i in range(g.k):
        assert tuple(indices[indptr[i]:indptr[i + 1]]) == g.adjacency[i]
