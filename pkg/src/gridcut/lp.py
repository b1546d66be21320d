"""Linear programs with dual values, backed by the HiGHS solver.

:class:`LinearProgram` keeps one HiGHS instance alive so that a sequence of
solves differing only in bounds restarts from the previous basis.  Duals use
the sensitivity convention: ``row_duals[k] = d(objective) / d(row bound k)``
and ``col_duals[j] = d(objective) / d(active bound of column j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import highspy
import numpy as np
import scipy.sparse as sp

__all__ = ["LPResult", "LinearProgram", "UnboundedLPError", "INF"]

INF = highspy.kHighsInf
OPTIMAL, INFEASIBLE = "optimal", "infeasible"

_INFEASIBLE_STATUSES = {
    highspy.HighsModelStatus.kInfeasible,
    highspy.HighsModelStatus.kUnboundedOrInfeasible,
}
_SETTLED = _INFEASIBLE_STATUSES | {
    highspy.HighsModelStatus.kOptimal,
    highspy.HighsModelStatus.kUnbounded,
}


class UnboundedLPError(ValueError):
    pass


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    row_duals: np.ndarray | None = None
    col_duals: np.ndarray | None = None

    @property
    def optimal(self):
        return self.status == OPTIMAL


def _inf(a):
    a = np.asarray(a, dtype=float).copy()
    a[np.isposinf(a)] = INF
    a[np.isneginf(a)] = -INF
    return a


class LinearProgram:
    """``min c @ x  s.t.  row_lo <= A x <= row_hi,  col_lo <= x <= col_hi``."""

    def __init__(self, c, A, row_lo, row_hi, col_lo, col_hi):
        A = sp.csc_matrix(A)
        self.n_rows, self.n_cols = A.shape
        self._h = highspy.Highs()
        self._h.setOptionValue("output_flag", False)
        lp = highspy.HighsLp()
        lp.num_col_ = self.n_cols
        lp.num_row_ = self.n_rows
        lp.col_cost_ = np.asarray(c, dtype=float)
        lp.col_lower_ = _inf(col_lo)
        lp.col_upper_ = _inf(col_hi)
        lp.row_lower_ = _inf(row_lo)
        lp.row_upper_ = _inf(row_hi)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        self._h.passModel(lp)

    def set_col_bounds(self, j, lo, hi):
        self._h.changeColBounds(int(j), float(_inf([lo])[0]), float(_inf([hi])[0]))

    def set_row_bounds(self, i, lo, hi):
        self._h.changeRowBounds(int(i), float(_inf([lo])[0]), float(_inf([hi])[0]))

    def set_costs(self, c):
        c = np.asarray(c, dtype=float)
        idx = np.arange(self.n_cols, dtype=np.int32)
        self._h.changeColsCost(self.n_cols, idx, c)

    def solve(self) -> LPResult:
        h = self._h
        h.run()
        status = h.getModelStatus()
        if status not in _SETTLED:
            # warm starts occasionally stall; retry from scratch once
            h.clearSolver()
            h.run()
            status = h.getModelStatus()
        if status in _INFEASIBLE_STATUSES:
            # a clean restart tells infeasible from unbounded
            if status == highspy.HighsModelStatus.kUnboundedOrInfeasible:
                h.clearSolver()
                h.run()
                status = h.getModelStatus()
            if status == highspy.HighsModelStatus.kUnbounded:
                raise UnboundedLPError("LP is unbounded; check generator cost data")
            if status in _INFEASIBLE_STATUSES:
                h.clearSolver()
                return LPResult(INFEASIBLE)
        if status == highspy.HighsModelStatus.kUnbounded:
            raise UnboundedLPError("LP is unbounded; check generator cost data")
        if status != highspy.HighsModelStatus.kOptimal:
            raise RuntimeError(f"LP solver failed: {h.modelStatusToString(status)}")
        sol = h.getSolution()
        return LPResult(
            OPTIMAL,
            np.array(sol.col_value),
            float(h.getInfo().objective_function_value),
            np.array(sol.row_dual),
            np.array(sol.col_dual),
        )
