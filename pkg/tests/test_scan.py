import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcpdrc import exact
from bcpdrc.errors import DomainError, ValidationError
from bcpdrc.graph import Graph
from bcpdrc.orderings import finite_energy_bounds
from bcpdrc.params import ModelParams
from bcpdrc.sampler import make_lattice, run_chain
from bcpdrc.scan import (ScanGrid, batch_means, closed_arc_condition, constants_from_pi, critical_constants,
                         field_ratio_arc, h_zero_arc, hysteresis_scan, region_predicates, scan, tau_estimate,
                         tau_exact)

SQ2 = math.sqrt(2.0)


def test_constants_closed_forms():
    c = critical_constants()
    assert math.isclose(c["a_bar"] * (1 + (1 + SQ2) ** 4), 1.0, abs_tol=1e-12)
    assert abs(c["p_bar"] - 0.970563) < 5e-7
    assert abs(c["pi_c"] - 0.585786) < 5e-7
    assert math.isclose(c["K_c"], 2 * math.log(1 + SQ2), abs_tol=1e-12)
    assert math.isclose(c["J_c"], 0.5 * math.log(1 + SQ2), abs_tol=1e-12)
    assert math.isclose(c["a_bar"], 1 / (17 + 12 * SQ2 + 1), abs_tol=1e-15)


def test_constants_display_rounding():
    c = critical_constants()
    assert round(c["pi_c"], 3) == 0.586
    assert round(c["p_c_site"], 3) == 0.593
    assert round(c["a_closed_site"], 2) == 0.26
    assert round(c["a_open_site"], 2) == 0.42
    assert round(c["a_bar"], 3) == 0.029
    assert round(c["p_bar"], 3) == 0.971


def test_constants_general_dimension_form_agrees():
    c = critical_constants()
    g = constants_from_pi(c["pi_c"], 2)
    assert math.isclose(g["a_bar"], c["a_bar"], rel_tol=1e-12)
    assert math.isclose(g["p_bar"], c["p_bar"], rel_tol=1e-12)


def test_constants_other_dimensions_rejected():
    with pytest.raises(DomainError):
        critical_constants(3)


@pytest.mark.parametrize("p,a", [(0.0, 0.5), (0.75, 0.2)])
def test_h_zero_arc_examples(p, a):
    assert math.isclose(h_zero_arc(p, 2), a, abs_tol=1e-15)


def test_h_zero_arc_meets_special_point():
    c = critical_constants()
    assert math.isclose(h_zero_arc(c["p_bar"], 2), c["a_bar"], rel_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(1, 3))
def test_h_zero_arc_has_zero_field(p, d):
    prm = ModelParams.from_apq(h_zero_arc(p, d), p, 1)
    _, h = exact.ising_map(prm, [2 * d])
    assert abs(h[0]) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-3, 3))
def test_field_ratio_arc_fixes_h_over_j(p, ratio):
    prm = ModelParams.from_apq(field_ratio_arc(p, ratio, 2), p, 1)
    J, h = exact.ising_map(prm, [4])
    assert math.isclose(h[0], ratio * J, abs_tol=1e-9)


def test_predicate_examples():
    assert not region_predicates(0.01, 0.98)["closed_strip"]
    assert region_predicates(0.005, 0.98)["closed_strip"]
    f = region_predicates(0.9, 0.99)
    assert f["open_strip"] and f["predict_open_cluster"] and f["predict_long_range_order"]
    f = region_predicates(0.5, 0.3)
    assert not f["closed_strip"] and not f["open_strip"]
    assert f["no_long_range_order"] and not f["predict_long_range_order"]


def test_predicates_domain():
    with pytest.raises(DomainError):
        region_predicates(0.0, 0.5)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_predicates_consistent(a, p):
    f = region_predicates(a, p)
    c = critical_constants()
    # the closed arc is the comparison with the product measure at p = 0
    if f["left_of_closed_arc"]:
        assert closed_arc_condition(a, p, c["a_closed_site"])
    assert not (f["predict_long_range_order"] and f["no_long_range_order"])
    if f["closed_strip"]:
        assert p > c["p_bar"] and a < c["a_bar"]


def test_batch_means():
    assert math.isnan(batch_means([0.3])[1])
    assert batch_means(np.ones(100)) == (1.0, 0.0)
    rng = np.random.default_rng(0)
    x = rng.normal(size=32_000)
    _, err = batch_means(x)
    assert 0.6 / math.sqrt(len(x)) < err < 1.5 / math.sqrt(len(x))


@pytest.mark.parametrize("K,Delta,q", [(0.4, 0.0, 2), (1.0, -0.5, 3), (0.3, 1.0, 4)])
def test_tau_exact_both_ways_on_k2(K, Delta, q):
    t = tau_exact(Graph.complete(2), K, Delta, q, 0, 1)
    assert abs(t["spin"] - t["conn"]) < 1e-12


def test_tau_q1_zero():
    s, _ = run_chain(make_lattice(2, 2, "one", 1), ModelParams.from_apq(0.5, 0.5, 1), 200, 50, seed=0)
    assert tau_estimate(s, 1)["spin"] == 0.0
    assert np.all(s.column("tau_spin") == 0) and np.all(s.column("tau_conn") == 0)
    assert tau_exact(Graph.path(3), 0.5, 0.2, 1, 0, 2) == {"spin": 0.0, "conn": 0.0}


def test_tau_sampled_estimators_agree():
    s, _ = run_chain(make_lattice(2, 4, "one", 1), ModelParams.from_apq(0.8, 0.6, 2), 16_500, 500, seed=4)
    diff = s.column("tau_spin") - s.column("tau_conn")
    mean, err = batch_means(diff)
    assert abs(mean) < 3 * err + 1e-12


def test_scan_grid_validation():
    with pytest.raises(ValidationError):
        ScanGrid(((0.5, 0.5),), sweeps=100, burn_in=100)
    with pytest.raises(DomainError):
        ScanGrid(((1.0, 0.5),))
    with pytest.raises(DomainError):
        ScanGrid(((0.5, 0.5),), q=1.5)
    g = ScanGrid(((0.7, 0.1), (0.2, 0.3), (0.2, 0.1)))
    assert g.points == ((0.2, 0.1), (0.2, 0.3), (0.7, 0.1))


def test_scan_deterministic_and_parallel_invariant():
    g = ScanGrid.product((0.3, 0.7), (0.2, 0.6), q=2, n=3, sweeps=400, burn_in=100, seed=7)
    a = scan(g).to_csv()
    b = scan(g).to_csv()
    c = scan(g, jobs=2).to_csv()
    assert a == b == c
    header = a.splitlines()[0].split(",")
    assert header[:5] == ["a", "p", "q", "n", "boundary"]
    assert "origin_to_boundary_err" in header


def test_single_sample_scan_flags_error():
    g = ScanGrid(((0.5, 0.5),), n=2, sweeps=11, burn_in=10)
    row = scan(g).rows[0]
    assert row["samples"] == 1 and not row["error_defined"]
    assert math.isnan(row["open_vertex_density_err"])


def test_scan_outputs():
    g = ScanGrid.product((0.3, 0.7), (0.2, 0.6), q=2, n=2, sweeps=200, burn_in=50)
    res = scan(g)
    gp = res.to_gnuplot("open_vertex_density").splitlines()
    assert gp[0].split()[0] == "2" and len(gp) == 3
    assert '"rows"' in res.to_json()


@pytest.mark.parametrize("boundary", ["zero", "one"])
def test_product_density_at_p_zero(boundary):
    g = ScanGrid.product((0.2, 0.5, 0.8), (0.0,), q=2, n=4, boundary=boundary, sweeps=4_200, burn_in=200, seed=3)
    for row in scan(g).rows:
        a, q = row["a"], row["q"]
        exact_density = q * a / (1 - a + q * a)
        assert abs(row["open_vertex_density"] - exact_density) < 3 * row["open_vertex_density_err"] + 1e-3


def test_density_inside_finite_energy_bounds():
    g = ScanGrid.product((0.2, 0.5, 0.8), (0.3, 0.7), q=2, n=4, sweeps=4_200, burn_in=200, seed=5)
    for row in scan(g).rows:
        lo, hi = finite_energy_bounds(ModelParams.from_apq(row["a"], row["p"], row["q"]), 4)
        m, e = row["open_vertex_density"], row["open_vertex_density_err"]
        assert lo - 3 * e <= m <= hi + 3 * e


def test_one_boundary_dominates_zero():
    kw = dict(q=2, n=4, sweeps=8_200, burn_in=200, seed=6)
    pts = ((0.4, 0.5), (0.7, 0.7))
    one = scan(ScanGrid(pts, boundary="one", **kw)).rows
    zero = scan(ScanGrid(pts, boundary="zero", **kw)).rows
    for r1, r0 in zip(one, zero):
        for name in ("open_vertex_density", "origin_open", "open_edge_density"):
            err = math.hypot(r1[name + "_err"], r0[name + "_err"])
            assert r1[name] >= r0[name] - 3 * err


def test_boundary_connectivity_increases_in_a():
    g = ScanGrid.product((0.3, 0.6, 0.9), (0.7,), q=2, n=5, sweeps=6_200, burn_in=200, seed=8)
    rows = scan(g).rows
    for lo, hi in zip(rows, rows[1:]):
        err = math.hypot(lo["origin_to_boundary_err"], hi["origin_to_boundary_err"])
        assert hi["origin_to_boundary"] >= lo["origin_to_boundary"] - 3 * err


def test_ising_arc_connectivity_extremes():
    pts = ((h_zero_arc(0.05), 0.05), (h_zero_arc(0.99), 0.99))
    rows = scan(ScanGrid(pts, q=1, n=8, sweeps=3_200, burn_in=200, seed=2)).rows
    by_p = {r["p"]: r for r in rows}
    assert by_p[0.05]["origin_to_boundary"] < 0.05
    assert by_p[0.99]["origin_to_boundary"] > 0.9


def test_cluster_fractions_below_densities():
    g = ScanGrid.product((0.3, 0.8), (0.5,), q=2, n=3, sweeps=1_200, burn_in=200)
    for r in scan(g).rows:
        assert r["largest_open_cluster"] <= r["open_vertex_density"] + 1e-12
        assert r["largest_closed_cluster"] <= 1 - r["open_vertex_density"] + 1e-12


def test_hysteresis_rows():
    rows = hysteresis_scan(0.98, [0.01, 0.03, 0.06], q=1, n=3, sweeps=300, burn_in=100)
    assert [r["direction"] for r in rows] == ["up"] * 3 + ["down"] * 3
    assert [r["a"] for r in rows] == [0.01, 0.03, 0.06, 0.06, 0.03, 0.01]
