import numpy as np
import pytest

from sodesn.errors import DataError
from sodesn.topology import (
    Topology,
    build_grid,
    from_undirected_edges,
    load_edge_list,
    sample_link_outcomes,
    save_edge_list,
)


def test_2x4_grid_shape():
    t = build_grid(2, 4)
    assert t.node_count == 8
    # corner node has 2 neighbors, edge node has 3
    assert t.degree(0) == 2
    assert t.degree(1) == 3
    assert t.positions[5] == (1, 1)


def test_10x10_interior_degree():
    t = build_grid(10, 10)
    assert t.node_count == 100
    interior = 5 * 10 + 5
    assert t.degree(interior) == 4


def test_degenerate_single_node_grid():
    t = build_grid(1, 1)
    assert t.node_count == 1
    assert t.neighbors[0] == frozenset()
    assert t.directed_edges == ()


@pytest.mark.parametrize("seed", range(8))
def test_grid_adjacency_symmetry_random_sizes(seed):
    rng = np.random.default_rng(seed)
    rows, cols = int(rng.integers(1, 51)), int(rng.integers(1, 51))
    t = build_grid(rows, cols)
    for i in range(t.node_count):
        for j in t.neighbors[i]:
            assert i in t.neighbors[j]
            assert j != i


@pytest.mark.parametrize("rows,cols", [(2, 2), (3, 5), (7, 2), (6, 6)])
def test_grid_degrees_between_2_and_4(rows, cols):
    t = build_grid(rows, cols)
    for i in range(t.node_count):
        assert t.degree(i) in (2, 3, 4)


def test_invalid_grid_sizes():
    with pytest.raises(ValueError):
        build_grid(0, 4)
    with pytest.raises(ValueError):
        build_grid(2, -1)


def test_asymmetric_adjacency_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        Topology(node_count=2, neighbors=(frozenset({1}), frozenset()))


def test_self_loop_rejected():
    with pytest.raises(ValueError, match="self-loop"):
        Topology(node_count=1, neighbors=(frozenset({0}),))


def test_link_outcomes_certain_success_and_failure():
    t = build_grid(2, 4)
    rng = np.random.default_rng(0)
    assert sample_link_outcomes(t, 1.0, rng).delivered.all()
    assert not sample_link_outcomes(t, 0.0, rng).delivered.any()


def test_link_outcome_rate_matches_quality():
    # Monte-Carlo estimate over one directed edge; binomial bound +-0.01.
    t = build_grid(1, 2)
    rng = np.random.default_rng(123)
    k = t.edge_index(0, 1)
    hits = sum(sample_link_outcomes(t, 0.9, rng).delivered[k] for _ in range(10_000))
    assert abs(hits / 10_000 - 0.9) < 0.01


def test_link_outcomes_reproducible_by_seed():
    t = build_grid(3, 3)
    a = [sample_link_outcomes(t, 0.5, np.random.default_rng(7)).delivered for _ in range(1)]
    b = [sample_link_outcomes(t, 0.5, np.random.default_rng(7)).delivered for _ in range(1)]
    assert np.array_equal(a, b)


def test_directions_sampled_independently():
    t = build_grid(1, 2)
    rng = np.random.default_rng(5)
    fwd = t.edge_index(0, 1)
    bwd = t.edge_index(1, 0)
    outcomes = [sample_link_outcomes(t, 0.5, rng) for _ in range(2000)]
    disagree = sum(o.delivered[fwd] != o.delivered[bwd] for o in outcomes)
    assert 700 < disagree < 1300  # ~50% under independence


def test_quality_out_of_range():
    t = build_grid(1, 2)
    with pytest.raises(ValueError):
        sample_link_outcomes(t, 1.5, np.random.default_rng(0))


def test_edge_list_round_trip(tmp_path):
    t = build_grid(3, 4)
    path = tmp_path / "grid.edges"
    save_edge_list(t, path)
    loaded = load_edge_list(path)
    assert loaded.node_count == t.node_count
    assert loaded.neighbors == t.neighbors


def test_edge_list_arbitrary_topology(tmp_path):
    path = tmp_path / "tri.edges"
    path.write_text("# triangle plus tail\n0 1\n1 2\n2 0\n2 3\n")
    t = load_edge_list(path)
    assert t.node_count == 4
    assert t.neighbors[2] == frozenset({0, 1, 3})


def test_edge_list_malformed(tmp_path):
    path = tmp_path / "bad.edges"
    path.write_text("0 1 2\n")
    with pytest.raises(DataError):
        load_edge_list(path)
    path.write_text("0 zero\n")
    with pytest.raises(DataError):
        load_edge_list(path)
    path.write_text("")
    with pytest.raises(DataError):
        load_edge_list(path)


def test_from_undirected_edges_validation():
    with pytest.raises(ValueError):
        from_undirected_edges(2, [(0, 2)])
    with pytest.raises(ValueError):
        from_undirected_edges(2, [(1, 1)])
