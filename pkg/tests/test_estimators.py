import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gridcut.datasets import make_congested_case, make_path, make_two_bus
from gridcut.dcflow import build_susceptance
from gridcut.dcopf import solve_dcopf
from gridcut.estimators import (
    DCOPF,
    DCPowerFlow,
    GreedySwitching,
    KronReduction,
    LmpDecomposer,
    ShiftFactors,
)
from gridcut.netmodel import Bus, CaseValidationError
from gridcut.topocontrol import standard_greedy


def test_params_and_clone():
    est = GreedySwitching(heuristic="local", threshold_frac=0.2)
    assert est.get_params()["threshold_frac"] == 0.2
    other = clone(est).set_params(max_iter=3)
    assert other.max_iter == 3 and est.max_iter == 50


def test_not_fitted():
    with pytest.raises(NotFittedError):
        DCPowerFlow().predict([0.0, 0.0])


def test_power_flow(triangle):
    est = DCPowerFlow().fit(triangle)
    np.testing.assert_allclose(est.predict([90.0, 0.0, -90.0]), [30.0, 30.0, 60.0])
    batch = est.predict([[90.0, 0.0, -90.0], [0.0, 0.0, 0.0]])
    assert batch.shape == (2, 3)
    with pytest.raises(ValueError):
        est.predict([1.0, np.nan, -1.0])
    with pytest.raises(ValueError):
        est.predict([1.0, -1.0])


def test_shift_factors(triangle):
    est = ShiftFactors().fit(triangle)
    assert est.psi_[3, 1] == pytest.approx(2 / 3)
    np.testing.assert_allclose(est.transform([90.0, 0.0, -90.0]), [30.0, 30.0, 60.0])
    assert est.optimal_pair(3, 10.0, [1, 3])[0] == (1, 3)
    with pytest.raises(ValueError):
        ShiftFactors(ref_bus=99).fit(triangle)


def test_kron_reduction():
    est = KronReduction(terminals=[1, 3]).fit(make_path(3))
    np.testing.assert_allclose(est.reduced_.matrix, [[0.5, -0.5], [-0.5, 0.5]])
    np.testing.assert_allclose(est.transform([-1.0, 1.0]), [0.0, 2.0])
    same = KronReduction(terminals=[1, 3]).fit(build_susceptance(make_path(3)))
    np.testing.assert_allclose(same.reduced_.matrix, est.reduced_.matrix)
    with pytest.raises(ValueError):
        KronReduction(terminals=[1]).fit(make_path(3))


def test_dcopf():
    case = make_two_bus(limit=60.0)
    est = DCOPF().fit(case)
    np.testing.assert_allclose(est.lmp_, [10.0, 20.0])
    assert est.objective_ == pytest.approx(1400.0)
    np.testing.assert_allclose(DCOPF(enforce_limits=False).fit(case).predict([[True]]), [1000.0])


def test_decomposer():
    case = make_congested_case(12, seed=4)
    est = LmpDecomposer(threshold_frac=0.1).fit(case)
    labels = est.transform(case.bus_ids)
    assert set(np.flatnonzero(labels == -1)) == {case.bus_index[b] for b in est.cut_}
    with pytest.raises(ValueError):
        LmpDecomposer(threshold_frac=2.0).fit(case)


def test_greedy_switching():
    case = make_congested_case(6, seed=1)
    est = GreedySwitching().fit(case)
    assert est.plan_.outages == standard_greedy(case).outages
    switched = est.transform()
    assert solve_dcopf(switched).objective == pytest.approx(est.plan_.objectives[-1])
    with pytest.raises(ValueError):
        GreedySwitching(heuristic="random").fit(case)


def test_invalid_case_rejected(triangle):
    bad = triangle.replace(buses=triangle.buses + (Bus(3, 0.0, False),))
    with pytest.raises(CaseValidationError, match="duplicate-bus"):
        DCPowerFlow().fit(bad)
