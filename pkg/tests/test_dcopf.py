import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridcut.datasets import make_congested_case, make_two_bus
from gridcut.dcflow import DisconnectedNetworkError
from gridcut.dcopf import (
    OpfModel,
    congested_lines,
    dual_is_stable,
    lmp_via_shift_factors,
    mas,
    solve_dcopf,
)
from gridcut.netmodel import Generator, with_line_status
from gridcut.sensitivity import shift_factor_matrix

seeds = st.integers(0, 2**31 - 1)


def test_two_bus_uncongested(two_bus):
    sol = solve_dcopf(two_bus)
    assert sol.optimal
    np.testing.assert_allclose(sol.dispatch, [100.0, 0.0], atol=1e-9)
    assert sol.objective == pytest.approx(1000.0)
    np.testing.assert_allclose(sol.lmp, [10.0, 10.0], atol=1e-9)
    np.testing.assert_allclose(sol.mu, [0.0], atol=1e-9)
    assert congested_lines(sol) == set()


def test_two_bus_congested():
    case = make_two_bus(limit=60.0)
    sol = solve_dcopf(case)
    np.testing.assert_allclose(sol.dispatch, [60.0, 40.0], atol=1e-9)
    np.testing.assert_allclose(sol.lmp, [10.0, 20.0], atol=1e-9)
    assert sol.mu[0] == pytest.approx(10.0)
    assert sol.mu_signed[0] == pytest.approx(10.0)
    assert congested_lines(sol) == {1}
    report = mas(case)
    assert report.mas == pytest.approx(400.0)
    assert report.unconstrained_cost == pytest.approx(1000.0)


def test_reverse_direction_sign():
    # cheap generator at the load end of a reversed line: flow runs to->from
    case = make_two_bus(limit=60.0, costs=(20.0, 10.0))
    case = case.replace(buses=tuple(b.__class__(b.id, 100.0 - b.load, not b.is_reference)
                                    for b in case.buses))
    sol = solve_dcopf(case)
    assert sol.flows[0] == pytest.approx(-60.0)
    assert sol.mu_signed[0] == pytest.approx(-10.0)
    psi = shift_factor_matrix(case)
    np.testing.assert_allclose(lmp_via_shift_factors(psi, sol.mu_signed, sol.lmp_ref), sol.lmp, atol=1e-9)


def test_infeasible_status():
    case = make_two_bus(limit=60.0)
    case = case.replace(generators=(Generator(1, 1, 0.0, 200.0, 10.0), Generator(2, 2, 0.0, 20.0, 20.0)))
    sol = solve_dcopf(case)
    assert sol.status == "infeasible"
    assert not mas(case).feasible


def test_disconnected_raises(two_bus):
    with pytest.raises(DisconnectedNetworkError):
        solve_dcopf(with_line_status(two_bus, 1, False))


def test_lmp_via_shift_factors_shape_check(two_bus):
    psi = shift_factor_matrix(two_bus)
    with pytest.raises(ValueError):
        lmp_via_shift_factors(psi, np.zeros(3), 10.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(6, 25), seeds)
def test_lmp_decomposition(n, seed):
    case = make_congested_case(n, seed=seed)
    sol = solve_dcopf(case)
    if not sol.optimal:
        return
    psi = shift_factor_matrix(case)
    rebuilt = lmp_via_shift_factors(psi, sol.mu_signed, sol.lmp_ref)
    np.testing.assert_allclose(rebuilt, sol.lmp, atol=1e-6 * max(np.abs(sol.lmp).max(), 1.0))


@settings(max_examples=25, deadline=None)
@given(st.integers(6, 25), seeds)
def test_strong_duality(n, seed):
    case = make_congested_case(n, seed=seed)
    sol = solve_dcopf(case)
    if not sol.optimal:
        return
    gen_lmp = sol.lmp[case.gen_bus_idx]
    costs = case.gen_costs
    lim = np.where(np.isfinite(sol.limits), sol.limits, 0.0)
    # cost = load payments - congestion rent - generator profit
    rhs = sol.lmp @ case.loads - sol.mu @ lim - (gen_lmp - costs) @ sol.dispatch
    assert sol.objective == pytest.approx(rhs, rel=1e-7, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(6, 20), seeds, st.floats(0.5, 0.99))
def test_relaxing_limits_never_raises_cost(n, seed, factor):
    case = make_congested_case(n, seed=seed)
    sol = solve_dcopf(case)
    if not sol.optimal:
        return
    looser = case.replace(lines=tuple(
        ln if ln.limit is None else ln.__class__(ln.id, ln.from_bus, ln.to_bus, ln.susceptance, ln.limit / factor)
        for ln in case.lines
    ))
    assert solve_dcopf(looser).objective <= sol.objective + 1e-6
    assert solve_dcopf(case, enforce_limits=False).objective <= sol.objective + 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 20), seeds)
def test_solution_feasible(n, seed):
    case = make_congested_case(n, seed=seed)
    sol = solve_dcopf(case)
    if not sol.optimal:
        return
    assert sol.dispatch.sum() == pytest.approx(case.loads.sum(), rel=1e-9)
    assert np.all(np.abs(sol.flows) <= sol.limits + 1e-6)
    assert np.all(sol.mu >= 0)
    assert sol.theta[case.bus_index[case.reference_bus]] == 0.0


def test_persistent_model_matches_fresh(ieee118):
    model = OpfModel(ieee118)
    on = ieee118.in_service.copy()
    base = model.solve(on)
    for k in (3, 40, 120):
        trial = on.copy()
        trial[k] = False
        warm = model.solve(trial)
        fresh = solve_dcopf(with_line_status(ieee118, int(ieee118.line_ids[k]), False))
        assert warm.status == fresh.status
        if warm.optimal:
            assert warm.objective == pytest.approx(fresh.objective, rel=1e-9)
    assert model.solve(on).objective == pytest.approx(base.objective, rel=1e-12)


def test_piecewise_costs():
    case = make_two_bus(limit=None)
    gens = (Generator(1, 1, 0.0, 200.0, 15.0, ((50.0, 10.0), (150.0, 20.0))),
            Generator(2, 2, 0.0, 200.0, 15.0))
    sol = solve_dcopf(case.replace(generators=gens))
    np.testing.assert_allclose(sol.dispatch, [50.0, 50.0], atol=1e-9)
    assert sol.objective == pytest.approx(50 * 10 + 50 * 15)
    assert sol.lmp[0] == pytest.approx(15.0)


def test_dual_stability(two_bus):
    assert dual_is_stable(make_two_bus(limit=60.0))
    # load exactly equal to the limit: the LMP at bus 2 is anywhere in [10, 20]
    assert not dual_is_stable(make_two_bus(limit=100.0))


def test_json_round_trip():
    sol = solve_dcopf(make_two_bus(limit=60.0))
    d = json.loads(sol.to_json())
    assert d["status"] == "optimal"
    assert d["lmp"] == {"1": pytest.approx(10.0), "2": pytest.approx(20.0)}
    assert d["dispatch"]["1"] == pytest.approx(60.0)
