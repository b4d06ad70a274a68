import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracle import bcp_weights
from bcpdrc import exact
from bcpdrc.errors import DomainError, ValidationError
from bcpdrc.graph import ONE, PERIODIC, ZERO, Graph, build_box_bounds
from bcpdrc.params import ModelParams
from bcpdrc.sampler import (OBSERVABLES, Chain, ChainState, bond_to_spin, cluster_kernel, heat_bath_kernel,
                            heat_bath_site, initial_state, lattice_from_graph, lattice_from_region,
                            make_lattice, run_chain, site_conditional, spin_to_bond, sweep_kernel)

KERNEL_GRAPHS = {"K2": Graph.complete(2), "P3": Graph.path(3), "K3": Graph.complete(3)}
KERNEL_PARAMS = [(0.3, 0.4, 1), (0.5 * math.log(2), 0.0, 2), (0.8, -0.7, 2), (0.4, 1.1, 3), (0.0, 0.0, 2)]


def oracle_pi(graph, K, Delta, q):
    w = bcp_weights(graph.n, graph.edges, K, Delta, q)
    states = list(itertools.product(range(q + 1), repeat=graph.n))
    v = np.array([w[s] for s in states])
    return v / v.sum()


def empirical(spins, q):
    n = spins.shape[1]
    idx = (spins * ((q + 1) ** np.arange(n)[::-1])).sum(axis=1)
    return np.bincount(idx, minlength=(q + 1) ** n) / len(idx)


# --- single-site conditional -------------------------------------------------


def test_site_conditional_example():
    # x = 0 with neighbours carrying spins (1, 0, 2, 1)
    g = Graph.star(4)
    probs = site_conditional([0, 1, 0, 2, 1], 0, g, 0.5, 0.2, 2)
    w = np.exp([0.2, 0.5, -0.5])
    assert np.allclose(probs, w / w.sum(), rtol=0, atol=1e-15)


def test_site_conditional_uniform_at_zero_coupling():
    probs = site_conditional([0, 1, 2, 2], 1, Graph.path(4), 0.0, 0.0, 3)
    assert np.allclose(probs, 0.25, atol=1e-15)


def test_site_conditional_large_negative_delta():
    probs = site_conditional([1, 0], 1, Graph.complete(2), 0.3, -40.0, 2)
    assert probs[0] < 1e-15


def test_site_conditional_a_equal_one():
    probs = site_conditional([1, 0], 1, Graph.complete(2), 0.3, -math.inf, 2)
    assert probs[0] == 0.0 and math.isclose(probs.sum(), 1.0)


@pytest.mark.parametrize("name", list(KERNEL_GRAPHS))
@pytest.mark.parametrize("K,Delta,q", KERNEL_PARAMS)
def test_site_conditional_matches_ratio_of_weights(name, K, Delta, q):
    g = KERNEL_GRAPHS[name]
    w = bcp_weights(g.n, g.edges, K, Delta, q)
    for sigma in itertools.product(range(q + 1), repeat=g.n):
        for x in range(g.n):
            col = [w[sigma[:x] + (t,) + sigma[x + 1:]] for t in range(q + 1)]
            assert np.allclose(site_conditional(sigma, x, g, K, Delta, q), np.array(col) / sum(col),
                               rtol=1e-12, atol=1e-15)


def test_heat_bath_site_only_changes_x():
    rng = np.random.default_rng(0)
    g = Graph.path(3)
    for _ in range(50):
        s = rng.integers(0, 3, size=3)
        out = heat_bath_site(s, 1, g, 0.4, 0.1, 2, rng)
        assert out[0] == s[0] and out[2] == s[2] and 0 <= out[1] <= 2


# --- exact kernels ----------------------------------------------------------


@pytest.mark.parametrize("name", list(KERNEL_GRAPHS))
@pytest.mark.parametrize("K,Delta,q", KERNEL_PARAMS)
def test_heat_bath_detailed_balance(name, K, Delta, q):
    g = KERNEL_GRAPHS[name]
    pi = oracle_pi(g, K, Delta, q)
    for x in range(g.n):
        P = heat_bath_kernel(g, x, K, Delta, q)
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
        flow = pi[:, None] * P
        assert np.max(np.abs(flow - flow.T)) < 1e-12


@pytest.mark.parametrize("name", list(KERNEL_GRAPHS))
@pytest.mark.parametrize("K,Delta,q", KERNEL_PARAMS)
def test_cluster_step_stationary_and_reversible(name, K, Delta, q):
    g = KERNEL_GRAPHS[name]
    pi = oracle_pi(g, K, Delta, q)
    P = cluster_kernel(g, K, q)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.max(np.abs(pi @ P - pi)) < 1e-12
    flow = pi[:, None] * P
    assert np.max(np.abs(flow - flow.T)) < 1e-12


def test_cluster_step_keeps_zero_set():
    g = Graph.path(3)
    P = cluster_kernel(g, 0.6, 2)
    states = list(itertools.product(range(3), repeat=3))
    for i, s in enumerate(states):
        for j, t in enumerate(states):
            if P[i, j] > 0:
                assert [a == 0 for a in s] == [b == 0 for b in t]


@pytest.mark.parametrize("name", list(KERNEL_GRAPHS))
def test_sweep_kernel_stationary_and_irreducible(name):
    g = KERNEL_GRAPHS[name]
    K, Delta, q = 0.6, 0.3, 2
    pi = oracle_pi(g, K, Delta, q)
    P = sweep_kernel(g, K, Delta, q)
    assert np.max(np.abs(pi @ P - pi)) < 1e-12
    # every state reachable: some power of P is strictly positive
    assert np.all(np.linalg.matrix_power(P, 2 * g.n) > 0)


def test_zero_coupling_mixes_in_one_sweep():
    g = Graph.path(3)
    pi = oracle_pi(g, 0.0, 0.4, 2)
    P = sweep_kernel(g, 0.0, 0.4, 2)
    assert np.allclose(P, np.tile(pi, (len(pi), 1)), atol=1e-12)


# --- spin_to_bond / bond_to_spin -------------------------------------------


def test_spin_to_bond_trivial_cases():
    rng = np.random.default_rng(1)
    edges = Graph.complete(3).edges
    psi, omega = spin_to_bond([0, 0, 0], 0.9, rng, edges)
    assert not psi.any() and not omega.any()
    psi, omega = spin_to_bond([1, 1, 2], 0.0, rng, edges)
    assert list(psi) == [1, 1, 1] and not omega.any()


def test_spin_to_bond_frequency():
    rng = np.random.default_rng(2)
    n = 100_000
    hits = sum(int(spin_to_bond([1, 1], 0.5, rng, ((0, 1),))[1][0]) for _ in range(n))
    assert abs(hits / n - 0.5) < 3 * math.sqrt(0.25 / n)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=4, max_size=4), st.floats(0, 0.99), st.integers(0, 2**32 - 1))
def test_spin_to_bond_output_compatible(sigma, p, seed):
    edges = Graph.cycle(4).edges
    psi, omega = spin_to_bond(sigma, p, np.random.default_rng(seed), edges)
    for (u, v), w in zip(edges, omega):
        if w:
            assert psi[u] and psi[v] and sigma[u] == sigma[v]


def test_bond_to_spin_single_cluster_uniform():
    rng = np.random.default_rng(3)
    g = Graph.complete(3)
    draws = np.array([bond_to_spin([1, 1, 1], [1, 1, 1], 3, rng, g.edges) for _ in range(30_000)])
    assert np.all(draws == draws[:, :1])
    freq = np.bincount(draws[:, 0], minlength=4)[1:] / len(draws)
    assert np.all(np.abs(freq - 1 / 3) < 3 * math.sqrt(2 / 9 / len(draws)))


def test_bond_to_spin_q1_deterministic():
    rng = np.random.default_rng(4)
    out = bond_to_spin([1, 0, 1], [0, 0], 1, rng, Graph.path(3).edges)
    assert list(out) == [1, 0, 1]


def test_bond_to_spin_two_free_clusters():
    rng = np.random.default_rng(5)
    n = 100_000
    draws = np.array([bond_to_spin([1, 1], [0], 2, rng, ((0, 1),)) for _ in range(n)])
    freq = np.bincount(3 * draws[:, 0] + draws[:, 1], minlength=9)[[4, 5, 7, 8]] / n
    assert np.all(np.abs(freq - 0.25) < 3 * math.sqrt(0.25 * 0.75 / n))


def test_bond_to_spin_wired_cluster_takes_boundary_spin():
    rng = np.random.default_rng(6)
    # vertices 0, 1 free; 2 fixed; edge 1-2 open
    for _ in range(20):
        out = bond_to_spin([1, 1, 1], [0, 1], 3, rng, ((0, 1), (1, 2)), boundary=2, fixed=[0, 0, 1])
        assert out[1] == 2 and out[2] == 2


# --- chains -----------------------------------------------------------------


def test_k2_chain_tv():
    g = Graph.complete(2)
    K, q = 0.5 * math.log(2), 2
    prm = ModelParams.from_kdelta(K, 0.0, q)
    s, _ = run_chain(lattice_from_graph(g), prm, 20_500, 500, seed=11, keep_configs=True)
    tv = 0.5 * np.abs(empirical(s.spins, q) - exact.bcp_measure(g, K, 0.0, q).probs).sum()
    assert tv < 0.01


@pytest.mark.parametrize("s_bnd", [0, 1, 2])
@pytest.mark.parametrize("order", [False, True])
def test_region_chain_matches_boundary_measure(s_bnd, order):
    region = build_box_bounds((0, 0), (1, 0))
    K, Delta, q = 0.5, 0.2, 2
    prm = ModelParams.from_kdelta(K, Delta, q)
    s, _ = run_chain(lattice_from_region(region, s_bnd), prm, 60_500, 500, seed=12,
                     random_order=order, keep_configs=True)
    ex = exact.bcp_measure_with_boundary(region, s_bnd, K, Delta, q)
    assert 0.5 * np.abs(empirical(s.spins, q) - ex.probs).sum() < 0.01


@pytest.mark.parametrize("name", ["P3", "K3"])
def test_three_vertex_q3_with_more_samples(name):
    g = KERNEL_GRAPHS[name]
    K, Delta, q = 0.7, 0.5, 3
    s, _ = run_chain(lattice_from_graph(g), ModelParams.from_kdelta(K, Delta, q), 1_001_000, 1000,
                     seed=13, keep_configs=True)
    assert 0.5 * np.abs(empirical(s.spins, q) - exact.bcp_measure(g, K, Delta, q).probs).sum() < 0.005


def test_same_seed_identical_and_chunking_invariant():
    lat = make_lattice(2, 3, ONE, 2)
    prm = ModelParams.from_apq(0.4, 0.6, 3)
    a, _ = run_chain(lat, prm, 700, 100, thin=3, seed=5)
    b, _ = run_chain(lat, prm, 700, 100, thin=3, seed=5)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.sweep, b.sweep)
    st_ = initial_state(lat, 5)
    chain = Chain(lat, prm, st_, chunk=7)
    chain.advance(100, record=False)
    c = chain.advance(600, thin=3, phase=100)
    assert np.array_equal(a.values, c.values)


def test_different_seeds_differ():
    lat = make_lattice(2, 3, ZERO)
    prm = ModelParams.from_apq(0.4, 0.6, 2)
    a, _ = run_chain(lat, prm, 300, 100, seed=1)
    b, _ = run_chain(lat, prm, 300, 100, seed=2)
    assert not np.array_equal(a.values, b.values)


def test_checkpoint_resume_is_exact(tmp_path):
    lat = make_lattice(2, 2, ONE, 1)
    prm = ModelParams.from_apq(0.5, 0.5, 2)
    full, _ = run_chain(lat, prm, 400, 50, thin=2, seed=9)
    part, state = run_chain(lat, prm, 250, 50, thin=2, seed=9)
    path = tmp_path / "chain.json"
    state.save(path)
    loaded = ChainState.load(path)
    assert loaded.sweeps == 250
    rest, final = run_chain(lat, prm, 400, 50, thin=2, state=loaded)
    assert final.sweeps == 400
    assert np.array_equal(np.concatenate([part.sweep, rest.sweep]), full.sweep)
    assert np.array_equal(np.concatenate([part.values, rest.values]), full.values)


def test_checkpoint_version_checked():
    with pytest.raises(ValidationError):
        ChainState.from_checkpoint({"version": 99})


def test_burn_in_not_below_sweeps_rejected():
    lat = lattice_from_graph(Graph.complete(2))
    with pytest.raises(ValidationError):
        run_chain(lat, ModelParams.from_apq(0.5, 0.5, 2), 100, 100)


def test_non_integer_q_rejected():
    lat = lattice_from_graph(Graph.complete(2))
    with pytest.raises(DomainError):
        run_chain(lat, ModelParams.from_apq(0.5, 0.5, 1.5), 10, 1)


def test_boundary_spin_above_q_rejected():
    lat = make_lattice(2, 1, ONE, 3)
    with pytest.raises(DomainError):
        run_chain(lat, ModelParams.from_apq(0.5, 0.5, 2), 10, 1)


def test_two_seeds_agree_within_error_bars():
    lat = make_lattice(2, 3, ONE, 1)
    prm = ModelParams.from_apq(0.5, 0.7, 2)
    means, errs = [], []
    for seed in (21, 22):
        s, _ = run_chain(lat, prm, 8200, 200, seed=seed)
        x = s.column("open_vertex_density").reshape(32, -1).mean(axis=1)
        means.append(x.mean())
        errs.append(x.std(ddof=1) / math.sqrt(32))
    assert abs(means[0] - means[1]) < 3 * math.hypot(*errs)


def test_ising_periodic_low_temperature_magnetized():
    # q = 1 at zero field and J = 0.6 above the critical coupling
    J = 0.6
    K = 4 * J
    prm = ModelParams.from_kdelta(K, 2 * K, 1)
    s, _ = run_chain(make_lattice(2, 8, PERIODIC), prm, 1500, 500, seed=3)
    m = 2 * s.column("open_vertex_density") - 1
    assert np.min(np.abs(m)) > 0.5


def test_observable_ranges_and_series_csv():
    lat = make_lattice(2, 2, ONE, 1)
    s, _ = run_chain(lat, ModelParams.from_apq(0.5, 0.5, 2), 60, 10, seed=0)
    v = s.values
    assert v.shape == (50, len(OBSERVABLES))
    for k in (0, 1, 2, 3, 4, 7):
        assert np.all((v[:, k] >= 0) & (v[:, k] <= 1))
    text = s.to_csv()
    assert text.splitlines()[0].startswith("sweep,open_vertex_density")
    assert len(text.splitlines()) == 51


def test_lattice_sizes():
    lat = make_lattice(2, 2, ONE, 1)
    assert (lat.n_free, lat.n_fixed, lat.n_edges) == (25, 20, 60)
    assert lat.target[25:].all() and not lat.target[:25].any()
    tor = make_lattice(2, 2, PERIODIC)
    assert (tor.n_free, tor.n_fixed, tor.n_edges) == (25, 0, 50)
    zero = make_lattice(2, 2, ZERO)
    assert zero.target.sum() == 16
