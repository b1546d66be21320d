import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridcut.datasets import make_path, make_random_case
from gridcut.dcflow import (
    DisconnectedNetworkError,
    ImbalanceWarning,
    build_susceptance,
    kron_reduce,
    reduce_reference,
    solve_dc_flow,
)
from gridcut.netmodel import with_line_status

seeds = st.integers(0, 2**31 - 1)


def test_two_bus_matrix(two_bus):
    B = build_susceptance(two_bus)
    np.testing.assert_array_equal(B.matrix, [[10, -10], [-10, 10]])
    red = reduce_reference(B, 2)
    np.testing.assert_array_equal(red.matrix, [[10]])


def test_triangle_matrix(triangle):
    B = build_susceptance(triangle).matrix
    np.testing.assert_array_equal(np.diag(B), [2, 2, 2])
    assert np.all(B[~np.eye(3, dtype=bool)] == -1)
    red = reduce_reference(build_susceptance(triangle), 3)
    np.testing.assert_array_equal(red.matrix, [[2, -1], [-1, 2]])
    np.testing.assert_allclose(np.linalg.eigvalsh(red.matrix), [1.0, 3.0])


def test_ieee118_laplacian(ieee118):
    B = build_susceptance(ieee118).matrix
    assert B.shape == (118, 118)
    np.testing.assert_allclose(B, B.T)
    np.testing.assert_allclose(B.sum(axis=1), 0.0, atol=1e-9 * np.abs(B).max())
    off = B[~np.eye(118, dtype=bool)]
    assert np.all(off <= 0)


def test_out_of_service_line_ignored(triangle):
    B = build_susceptance(with_line_status(triangle, 3, False)).matrix
    assert B[0, 2] == 0 and B[0, 0] == 1


def test_islanded_reduce_fails():
    case = with_line_status(make_path(4), 2, False)
    with pytest.raises(DisconnectedNetworkError):
        reduce_reference(build_susceptance(case), case.reference_bus)


def test_series_flow(two_bus):
    st_ = solve_dc_flow(two_bus, [100.0, -100.0])
    assert st_.flows[0] == pytest.approx(100.0)
    assert st_.theta[1] == 0.0


def test_triangle_split(triangle):
    # direct path b=1, two-line path b=1/2 in series: 2/3 and 1/3 of the transfer
    st_ = solve_dc_flow(triangle, [90.0, 0.0, -90.0])
    lines = dict(zip(st_.line_ids, st_.flows))
    assert lines[3] == pytest.approx(60.0)
    assert lines[1] == pytest.approx(30.0)
    assert lines[2] == pytest.approx(30.0)


def test_zero_injection(ieee118):
    st_ = solve_dc_flow(ieee118, np.zeros(118))
    assert np.all(st_.flows == 0)


def test_imbalance_goes_to_reference(triangle):
    with pytest.warns(ImbalanceWarning):
        st_ = solve_dc_flow(triangle, [90.0, 0.0, 0.0])
    np.testing.assert_allclose(st_.injections, [90, 0, -90])


def test_disconnected_flow_raises():
    case = with_line_status(make_path(3), 1, False)
    with pytest.raises(DisconnectedNetworkError):
        solve_dc_flow(case, np.zeros(3))


def test_kron_series():
    B = build_susceptance(make_path(3))
    red = kron_reduce(B, [1, 3])
    np.testing.assert_allclose(red.matrix, [[0.5, -0.5], [-0.5, 0.5]])


def test_kron_no_interior(triangle):
    B = build_susceptance(triangle)
    np.testing.assert_array_equal(kron_reduce(B, [1, 2, 3]).matrix, B.matrix)


def test_kron_singular_interior():
    case = with_line_status(make_path(4), 3, False)  # bus 4 isolated
    with pytest.raises(np.linalg.LinAlgError):
        kron_reduce(build_susceptance(case), [1, 2])


def _terminal_angle_check(case, terminals, rng, n_inj):
    """Compare terminal angle differences of the full and Kron-reduced networks.

    Oracle: Moore-Penrose pseudo-inverse of each Laplacian, no factorisation
    shared with the code under test.
    """
    B = build_susceptance(case)
    red = kron_reduce(B, terminals)
    t_idx = [B.index(t) for t in terminals]
    full_pinv = np.linalg.pinv(B.matrix)
    red_pinv = np.linalg.pinv(red.matrix)
    worst = 0.0
    for _ in range(n_inj):
        p_t = rng.normal(size=len(terminals))
        p_t -= p_t.mean()
        p = np.zeros(B.size)
        p[t_idx] = p_t
        th_full = (full_pinv @ p)[t_idx]
        th_red = red_pinv @ p_t
        d_full = th_full - th_full[0]
        d_red = th_red - th_red[0]
        worst = max(worst, np.max(np.abs(d_full - d_red)))
    return worst, red


def test_kron_random_ten_bus():
    rng = np.random.default_rng(3)
    case = make_random_case(10, seed=3)
    terminals = [int(b) for b in rng.choice(case.bus_ids, 4, replace=False)]
    worst, red = _terminal_angle_check(case, terminals, rng, 20)
    assert worst <= 1e-9
    # still a Laplacian, generally complete
    np.testing.assert_allclose(red.matrix.sum(axis=1), 0.0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 20), seeds)
def test_kron_equivalence_property(n, seed):
    rng = np.random.default_rng(seed)
    case = make_random_case(n, seed=seed)
    k = int(rng.integers(2, n + 1))
    terminals = [int(b) for b in rng.choice(case.bus_ids, k, replace=False)]
    worst, red = _terminal_angle_check(case, terminals, rng, 3)
    assert worst <= 1e-9
    off = red.matrix[~np.eye(k, dtype=bool)]
    assert np.all(off <= 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), seeds)
def test_reduced_matrix_positive_definite(n, seed):
    case = make_random_case(n, seed=seed)
    red = reduce_reference(build_susceptance(case), case.reference_bus)
    assert np.linalg.eigvalsh(red.matrix).min() > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), seeds)
def test_superposition(n, seed):
    rng = np.random.default_rng(seed)
    case = make_random_case(n, seed=seed)
    p1 = rng.normal(size=n)
    p2 = rng.normal(size=n)
    p1 -= p1.mean()
    p2 -= p2.mean()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ImbalanceWarning)
        f1 = solve_dc_flow(case, p1).flows
        f2 = solve_dc_flow(case, p2).flows
        f12 = solve_dc_flow(case, p1 + p2).flows
    scale = max(np.abs(f12).max(), 1e-12)
    assert np.max(np.abs(f12 - f1 - f2)) <= 1e-9 * scale


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), seeds)
def test_energy_form(n, seed):
    rng = np.random.default_rng(seed)
    case = make_random_case(n, seed=seed)
    B = build_susceptance(case).matrix
    theta = rng.normal(size=n)
    assert theta @ B @ theta >= 0
    flat = np.full(n, rng.normal())
    assert abs(flat @ B @ flat) <= 1e-9 * np.abs(B).sum()


def test_flow_conservation(ieee118):
    rng = np.random.default_rng(0)
    p = rng.normal(size=118) * 30
    p -= p.mean()
    st_ = solve_dc_flow(ieee118, p)
    net = np.zeros(118)
    np.add.at(net, ieee118.from_idx, st_.flows)
    np.add.at(net, ieee118.to_idx, -st_.flows)
    np.testing.assert_allclose(net, p, atol=1e-8)
