import numpy as np
import pytest

from sodesn.reservoir import (
    NetworkState,
    NodeSpec,
    Sodesn,
    assemble_global_w,
    init_sodesn,
    random_network_state,
    spectral_radius,
    step,
)
from sodesn.topology import build_grid, from_undirected_edges, sample_link_outcomes


def make_net(rows=2, cols=4, units=15, seed=42, **kwargs):
    net = init_sodesn(
        build_grid(rows, cols), NodeSpec(1, units, 1), rng=seed, **kwargs
    )
    return net


# ----------------------------------------------------------------------
# spectral radius
# ----------------------------------------------------------------------


def test_spectral_radius_diagonal():
    assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9)


def test_spectral_radius_zero_matrix():
    assert spectral_radius(np.zeros((5, 5))) == 0.0


def test_spectral_radius_matches_dense_oracle():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(8, 8))
    oracle = np.max(np.abs(np.linalg.eigvals(w)))
    assert spectral_radius(w) == pytest.approx(oracle, abs=1e-6)


def test_spectral_radius_sparse_arpack_path_matches_oracle():
    import scipy.sparse as sp

    rng = np.random.default_rng(1)
    dense = rng.normal(size=(300, 300)) * (rng.random((300, 300)) < 0.05)
    oracle = np.max(np.abs(np.linalg.eigvals(dense)))
    value = spectral_radius(sp.csr_matrix(dense))
    assert value == pytest.approx(oracle, rel=1e-6)


def test_spectral_radius_non_square_raises():
    with pytest.raises(ValueError, match="square"):
        spectral_radius(np.zeros((3, 4)))


# ----------------------------------------------------------------------
# initialization
# ----------------------------------------------------------------------


def test_init_2x4_grid_global_radius():
    net = make_net()
    w = assemble_global_w(net)
    assert w.shape == (120, 120)
    oracle = np.max(np.abs(np.linalg.eigvals(w)))
    assert oracle == pytest.approx(0.66, abs=1e-6)


def test_init_single_node_has_no_proxies():
    net = make_net(rows=1, cols=1, units=10)
    assert net.n_proxies == 0
    assert net.cross[0].shape == (10, 0)
    w = assemble_global_w(net)
    assert np.array_equal(w, net.w_local[0])


def test_init_cross_blocks_respect_adjacency():
    net = make_net(rows=2, cols=2, units=3, seed=9)
    w = assemble_global_w(net)
    topo = net.topology
    for a in range(4):
        for b in range(4):
            block = w[net.internal_slice(a), net.internal_slice(b)]
            if a == b:
                continue
            if b not in topo.neighbors[a]:
                assert np.all(block == 0.0)


def test_locality_on_random_topologies():
    rng = np.random.default_rng(7)
    for trial in range(10):
        n = int(rng.integers(3, 9))
        edges = set()
        for i in range(1, n):  # random connected-ish graph
            edges.add((int(rng.integers(0, i)), i))
        for _ in range(n):
            a, b = int(rng.integers(0, n)), int(rng.integers(0, n))
            if a != b:
                edges.add((min(a, b), max(a, b)))
        topo = from_undirected_edges(n, sorted(edges))
        net = init_sodesn(topo, NodeSpec(1, 4, 1), rng=int(rng.integers(1 << 31)))
        w = assemble_global_w(net)
        for a in range(n):
            for b in range(n):
                if a != b and b not in topo.neighbors[a]:
                    assert np.all(w[net.internal_slice(a), net.internal_slice(b)] == 0.0)


def test_init_zero_internal_units_rejected():
    with pytest.raises(ValueError):
        NodeSpec(1, 0, 1)


def test_init_parameter_validation():
    grid = build_grid(2, 2)
    with pytest.raises(ValueError):
        init_sodesn(grid, NodeSpec(1, 5, 1), rho_target=1.2)
    with pytest.raises(ValueError):
        init_sodesn(grid, NodeSpec(1, 5, 1), density_local=0.0)


def test_cross_density_selects_fraction_of_proxies():
    net = make_net(rows=2, cols=4, units=15, seed=3, density_cross=0.1)
    for j in range(net.n_nodes):
        mj = net.proxy_counts[j]
        wired = np.sum(np.any(net.cross[j] != 0.0, axis=0))
        assert wired == round(0.1 * mj)


def test_init_deterministic_from_seed():
    a, b = make_net(seed=123), make_net(seed=123)
    for j in range(a.n_nodes):
        assert np.array_equal(a.w_local[j], b.w_local[j])
        assert np.array_equal(a.w_in[j], b.w_in[j])
        assert np.array_equal(a.cross[j], b.cross[j])


# ----------------------------------------------------------------------
# stepping
# ----------------------------------------------------------------------


def test_step_zero_weights_gives_zero_state():
    net = make_net(rows=1, cols=2, units=4, seed=1)
    for j in range(2):
        net.w_local[j][:] = 0.0
        net.w_in[j][:] = 0.0
        net.cross[j][:] = 0.0
    net._ops_cache = None
    links = sample_link_outcomes(net.topology, 1.0, np.random.default_rng(0))
    state = step(net, net.zero_state(), [0.7, -0.3], links)
    assert np.all(state.x == 0.0)
    assert np.all(state.y == 0.0)


def test_step_single_node_direct_evaluation():
    net = make_net(rows=1, cols=1, units=1, seed=1)
    net.w_local[0][:] = 0.0
    net.w_in[0][:] = 1.0
    net._ops_cache = None
    links = sample_link_outcomes(net.topology, 1.0, np.random.default_rng(0))
    state = step(net, net.zero_state(), [0.5], links)
    assert state.x[0] == pytest.approx(np.tanh(0.5))


def test_step_internal_activations_in_tanh_range():
    net = make_net(seed=5)
    rng = np.random.default_rng(2)
    state = net.zero_state()
    for _ in range(50):
        links = sample_link_outcomes(net.topology, 0.9, rng)
        state = step(net, state, rng.uniform(-1, 1, 8), links)
        assert np.all(np.abs(state.x) < 1.0)


def test_all_links_failed_equals_disconnected_nodes():
    # A 2-node net whose links never deliver must follow exactly the same
    # trajectories as two standalone single-node nets with the same weights.
    net = make_net(rows=1, cols=2, units=6, seed=11)
    singles = []
    for j in range(2):
        single = Sodesn(
            topology=build_grid(1, 1),
            spec=net.spec,
            w_local=[net.w_local[j]],
            w_in=[net.w_in[j]],
            cross=[np.zeros((6, 0))],
            w_out=[net.w_out[j][:, net.proxy_counts[j] :]],
            rho_target=net.rho_target,
        )
        singles.append(single)
    rng = np.random.default_rng(3)
    state = net.zero_state()
    states_single = [s.zero_state() for s in singles]
    dead = sample_link_outcomes(net.topology, 0.0, rng)
    live = sample_link_outcomes(build_grid(1, 1), 1.0, rng)
    for n in range(40):
        u = rng.uniform(-1, 1, 2)
        state = step(net, state, u, dead)
        for j in range(2):
            states_single[j] = step(singles[j], states_single[j], [u[j]], live)
        combined = np.concatenate([states_single[0].x, states_single[1].x])
        assert np.array_equal(state.x, combined)
        assert np.all(state.proxy == 0.0)


def test_proxy_reset_on_failed_link():
    net = make_net(rows=1, cols=2, units=4, seed=2)
    rng = np.random.default_rng(0)
    live = sample_link_outcomes(net.topology, 1.0, rng)
    state = step(net, net.zero_state(), [0.5, -0.5], live)
    assert np.any(state.proxy != 0.0)
    # fail only the 0 -> 1 direction
    outcomes = live.delivered.copy()
    outcomes[net.topology.edge_index(0, 1)] = False
    from sodesn.topology import LinkOutcomes

    state = step(net, state, [0.5, -0.5], LinkOutcomes(net.topology, outcomes))
    assert np.all(state.proxy[net.proxies_from(1, 0)] == 0.0)
    assert np.any(state.proxy[net.proxies_from(0, 1)] != 0.0)


def test_step_dimension_mismatch():
    net = make_net()
    links = sample_link_outcomes(net.topology, 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        step(net, net.zero_state(), np.zeros(5), links)
    other = sample_link_outcomes(build_grid(2, 2), 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        step(net, net.zero_state(), np.zeros(8), other)


def test_trajectories_bit_identical_for_same_seed():
    def run():
        net = make_net(seed=77)
        rng = np.random.default_rng(5)
        state = net.zero_state()
        out = []
        for n in range(30):
            links = sample_link_outcomes(net.topology, 0.8, rng)
            state = step(net, state, np.sin(np.arange(8) * 0.3 + n), links)
            out.append(state.x.copy())
        return np.vstack(out)

    assert np.array_equal(run(), run())


@pytest.mark.parametrize("seed", range(5))
def test_echo_state_convergence(seed):
    net = make_net(seed=1000 + seed)
    rng = np.random.default_rng(seed)
    s1 = random_network_state(net, rng)
    s2 = random_network_state(net, rng)
    link_rng1 = np.random.default_rng(9000 + seed)
    link_rng2 = np.random.default_rng(9000 + seed)
    for n in range(1000):
        u = np.sin(np.arange(8) * 0.7 + 0.05 * n)
        s1 = step(net, s1, u, sample_link_outcomes(net.topology, 0.9, link_rng1))
        s2 = step(net, s2, u, sample_link_outcomes(net.topology, 0.9, link_rng2))
    assert float(np.sum((s1.x - s2.x) ** 2)) < 1e-6


def test_readout_order_is_proxy_internal_input():
    net = make_net(rows=1, cols=2, units=3, seed=4)
    rng = np.random.default_rng(1)
    links = sample_link_outcomes(net.topology, 1.0, rng)
    state = step(net, net.zero_state(), [0.3, -0.6], links)
    z = net.readout_vector(state)
    # node 0 block: 3 proxies (from node 1), 3 internal, 1 input
    assert np.array_equal(z[:3], state.proxy[net.proxy_slice(0)])
    assert np.array_equal(z[3:6], state.x[:3])
    assert z[6] == state.u[0]


def test_scaled_radius_reached_for_various_grids():
    for rows, cols, units in [(1, 2, 5), (3, 3, 4), (2, 4, 15)]:
        net = make_net(rows=rows, cols=cols, units=units, seed=rows * 10 + cols)
        w = assemble_global_w(net)
        oracle = np.max(np.abs(np.linalg.eigvals(np.asarray(w))))
        assert oracle == pytest.approx(0.66, abs=1e-6)
