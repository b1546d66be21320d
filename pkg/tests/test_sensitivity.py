import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import exhaustive_pair, ptdf_sign_disagreements, transfer_flows
from gridcut.datasets import make_path, make_random_case
from gridcut.dcflow import DisconnectedNetworkError, solve_dc_flow
from gridcut.graphdecomp import Graph, bridges
from gridcut.netmodel import with_line_status
from gridcut.sensitivity import (
    UncontrollableCongestionError,
    lodf_matrix,
    lodf_to_csv,
    optimal_bus_pair,
    post_outage_shift_factors,
    ptdf,
    shift_factor_matrix,
    shift_factors_to_csv,
)

seeds = st.integers(0, 2**31 - 1)


def test_two_bus_shift_factors(two_bus):
    psi = shift_factor_matrix(two_bus, 2)
    np.testing.assert_allclose(psi.values, [[1.0, 0.0]])


def test_triangle_shift_factor(triangle):
    psi = shift_factor_matrix(triangle, 3)
    assert psi[3, 1] == pytest.approx(2 / 3)
    assert psi[1, 1] == pytest.approx(1 / 3)


def test_reference_column_zero(ieee118):
    psi = shift_factor_matrix(ieee118)
    assert np.all(psi.values[:, psi.bus_col(ieee118.reference_bus)] == 0)
    assert np.all(np.isfinite(psi.values))
    assert np.abs(psi.values).max() <= 1 + 1e-9


def test_columns_match_dc_solves(ieee118):
    psi = shift_factor_matrix(ieee118)
    ref = ieee118.reference_bus
    for bus in (1, 10, 59, 100, 118):
        np.testing.assert_allclose(psi.values[:, psi.bus_col(bus)], transfer_flows(ieee118, bus, ref), atol=1e-10)


def test_ptdf_basics(two_bus, ieee118):
    psi = shift_factor_matrix(two_bus)
    assert ptdf(psi, 1, 1, 1) == (0.0, 0.0)
    assert ptdf(psi, 1, 1, 2) == pytest.approx((1.0, 1.0))
    a = shift_factor_matrix(ieee118, 69)
    b = shift_factor_matrix(ieee118, 1)
    for line, j1, j2 in [(5, 3, 77), (100, 12, 90), (186, 40, 118)]:
        assert ptdf(a, line, j1, j2)[0] == pytest.approx(ptdf(b, line, j1, j2)[0], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 20), seeds)
def test_ptdf_reference_invariance(n, seed):
    case = make_random_case(n, seed=seed)
    rng = np.random.default_rng(seed)
    r1, r2 = (int(b) for b in rng.choice(case.bus_ids, 2, replace=False))
    a = shift_factor_matrix(case, r1).values
    b = shift_factor_matrix(case, r2).values
    j1, j2 = rng.choice(n, 2, replace=False)
    np.testing.assert_allclose(a[:, j1] - a[:, j2], b[:, j1] - b[:, j2], atol=1e-10)


def test_triangle_lodf(triangle):
    lodf = lodf_matrix(triangle)
    # line 1 (1->2) out: its flow detours 1->3 (line 3, same sense) and 3->2 (line 2, reversed)
    assert lodf[3, 1] == pytest.approx(1.0)
    assert lodf[2, 1] == pytest.approx(-1.0)
    assert lodf[1, 1] == -1.0
    base = solve_dc_flow(triangle, [90.0, 0.0, -90.0]).flows
    after = solve_dc_flow(with_line_status(triangle, 1, False), [90.0, 0.0, -90.0]).flows
    np.testing.assert_allclose(lodf.predict_flows(base, 1), after, atol=1e-12)


def test_bridge_lodf_undefined():
    lodf = lodf_matrix(make_path(4))
    assert lodf.undefined.all()
    assert np.isnan(lodf.values).all()
    with pytest.raises(DisconnectedNetworkError):
        lodf.predict_flows(np.zeros(3), 2)


def test_lodf_matches_resolve_random():
    case = make_random_case(20, seed=11)
    lodf = lodf_matrix(case)
    rng = np.random.default_rng(1)
    p = rng.normal(size=20) * 40
    p -= p.mean()
    base = solve_dc_flow(case, p).flows
    br = bridges(Graph.from_case(case))
    for lid in case.line_ids:
        if lid in br:
            assert lodf.undefined[case.line_index[lid]]
            continue
        after = solve_dc_flow(with_line_status(case, int(lid), False), p).flows
        np.testing.assert_allclose(lodf.predict_flows(base, lid), after, atol=1e-9 * np.abs(base).max())


def test_post_outage_shift_factors(triangle):
    psi = shift_factor_matrix(triangle)
    lodf = lodf_matrix(triangle)
    post = post_outage_shift_factors(triangle, 1)
    # post-outage shift factors from pre-outage ones: psi + lodf[:, j] psi[j, :]
    predicted = psi.values + np.outer(lodf.values[:, 0], psi.values[0])
    predicted[0] = 0.0
    np.testing.assert_allclose(post.values, predicted, atol=1e-12)


def test_post_outage_of_out_line(triangle):
    off = with_line_status(triangle, 2, False)
    np.testing.assert_array_equal(
        post_outage_shift_factors(off, 2).values, shift_factor_matrix(off).values
    )


def test_post_outage_bridge_raises():
    with pytest.raises(DisconnectedNetworkError):
        post_outage_shift_factors(make_path(3), 1)


def test_optimal_pair_endpoints(triangle):
    psi = shift_factor_matrix(triangle)
    pair, delta = optimal_bus_pair(psi, 3, 10.0, [1, 3])
    assert pair == (1, 3)
    assert delta == pytest.approx(10.0 / (2 / 3))


def test_optimal_pair_zero_overload(triangle):
    psi = shift_factor_matrix(triangle)
    pair, delta = optimal_bus_pair(psi, 3, 0.0, [1, 2, 3])
    assert delta == 0.0


def test_optimal_pair_uncontrollable():
    # a bus hanging off the grid shares its shift factors with its attachment point
    case = make_path(4)
    psi = shift_factor_matrix(case)
    with pytest.raises(UncontrollableCongestionError):
        optimal_bus_pair(psi, 3, 5.0, [1, 2, 3])


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 20), seeds)
def test_optimal_pair_matches_enumeration(n, seed):
    case = make_random_case(n, seed=seed)
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, min(n, 12) + 1))
    cands = [int(b) for b in rng.choice(case.bus_ids, m, replace=False)]
    line = int(rng.choice(case.line_ids))
    psi = shift_factor_matrix(case)
    try:
        got = optimal_bus_pair(psi, line, 25.0, cands)
    except UncontrollableCongestionError:
        k = case.line_index[line]
        assert all(abs(transfer_flows(case, a, b)[k]) < 1e-9 for a, b in itertools.combinations(cands, 2))
        return
    want = exhaustive_pair(case, line, 25.0, cands)
    assert got[0] == want[0]
    assert got[1] == pytest.approx(want[1], rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 25), seeds)
def test_reciprocal_ptdf_sign_agreement(n, seed):
    case = make_random_case(n, seed=seed)
    psi = shift_factor_matrix(case)
    assert ptdf_sign_disagreements(case, psi, np.random.default_rng(seed), 20) == 0


def test_csv_exports(triangle):
    psi = shift_factor_matrix(triangle)
    rows = shift_factors_to_csv(psi).splitlines()
    assert rows[0] == "line_id,bus_id,value"
    assert len(rows) == 1 + 9
    lodf = lodf_to_csv(lodf_matrix(triangle)).splitlines()
    assert lodf[0] == "line_i,line_j,value"
    assert "1,1,-1.0" in lodf
