"""Estimator-style wrappers: configure in ``__init__``, compute in ``fit``.

Each class follows the scikit-learn conventions (``get_params``/``set_params``,
fitted attributes ending in ``_``) so that grids can be swept with the usual
tooling.  The functional API in the other modules does the actual work.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from gridcut import dcflow, dcopf, graphdecomp, sensitivity, topocontrol
from gridcut._validation import check_bus_ids, check_case, check_fraction, check_injections
from gridcut.netmodel import GridCase

__all__ = [
    "DCPowerFlow",
    "ShiftFactors",
    "KronReduction",
    "DCOPF",
    "LmpDecomposer",
    "GreedySwitching",
]


class DCPowerFlow(BaseEstimator):
    """Linear power flow on a fixed topology.

    ``fit`` factors the reduced susceptance matrix once; ``transform`` maps
    injections to bus angles and ``predict`` to line flows (MW).
    """

    def fit(self, case, y=None):
        self.case_ = check_case(case)
        B = dcflow.build_susceptance(self.case_)
        self.reduced_ = dcflow.reduce_reference(B, self.case_.reference_bus)
        return self

    def _states(self, injections):
        check_is_fitted(self, "reduced_")
        p = check_injections(self.case_, injections)
        rows = np.atleast_2d(p)
        states = [dcflow.solve_dc_flow(self.case_, r, self.reduced_) for r in rows]
        return states, p.ndim == 1

    def transform(self, injections):
        states, single = self._states(injections)
        out = np.array([s.theta for s in states])
        return out[0] if single else out

    def predict(self, injections):
        states, single = self._states(injections)
        out = np.array([s.flows for s in states])
        return out[0] if single else out


class ShiftFactors(BaseEstimator, TransformerMixin):
    """Injection shift factors and line outage distribution factors.

    Parameters
    ----------
    ref_bus : int, optional
        Bus absorbing every injection; defaults to the case reference.
    with_lodf : bool
        Also compute the LODF matrix in ``fit``.
    """

    def __init__(self, ref_bus=None, with_lodf=True):
        self.ref_bus = ref_bus
        self.with_lodf = with_lodf

    def fit(self, case, y=None):
        self.case_ = check_case(case)
        if self.ref_bus is not None:
            check_bus_ids(self.case_, [self.ref_bus], "ref_bus")
        self.psi_ = sensitivity.shift_factor_matrix(self.case_, self.ref_bus)
        self.lodf_ = sensitivity.lodf_matrix(self.case_, self.psi_) if self.with_lodf else None
        return self

    def transform(self, injections):
        """Line flows ``psi @ p`` for injections balanced at the reference bus."""
        check_is_fitted(self, "psi_")
        p = check_injections(self.case_, injections)
        return p @ self.psi_.values.T

    def optimal_pair(self, line, overload, candidates):
        check_is_fitted(self, "psi_")
        return sensitivity.optimal_bus_pair(
            self.psi_, line, overload, check_bus_ids(self.case_, candidates, "candidates")
        )


class KronReduction(BaseEstimator, TransformerMixin):
    """Terminal-equivalent network of a case or susceptance matrix.

    ``transform`` maps terminal injections to terminal angles relative to
    the first terminal.
    """

    def __init__(self, terminals=()):
        self.terminals = terminals

    def fit(self, X, y=None):
        if isinstance(X, dcflow.SusceptanceMatrix):
            B = X
        else:
            B = dcflow.build_susceptance(check_case(X))
        if len(self.terminals) < 2:
            raise ValueError("at least two terminals are required")
        unknown = set(self.terminals) - set(B.bus_ids)
        if unknown:
            raise ValueError(f"terminals contain unknown bus ids {sorted(unknown)}")
        self.reduced_ = dcflow.kron_reduce(B, self.terminals)
        return self

    def transform(self, injections):
        check_is_fitted(self, "reduced_")
        p = np.atleast_2d(np.asarray(injections, dtype=float))
        if p.shape[1] != self.reduced_.size or not np.all(np.isfinite(p)):
            raise ValueError(f"expected {self.reduced_.size} finite terminal injections")
        M = self.reduced_.matrix[1:, 1:]
        theta = np.zeros_like(p)
        theta[:, 1:] = np.linalg.solve(M, p[:, 1:].T).T
        return theta[0] if np.ndim(injections) == 1 else theta


class DCOPF(BaseEstimator):
    """Least-cost dispatch with LMPs and line shadow prices.

    ``predict`` re-solves on the fitted case for a batch of line-status
    vectors (rows of booleans), reusing the warm-started model.
    """

    def __init__(self, enforce_limits=True):
        self.enforce_limits = enforce_limits

    def fit(self, case, y=None):
        self.case_ = check_case(case)
        self.model_ = dcopf.OpfModel(self.case_)
        self.solution_ = self.model_.solve(enforce_limits=self.enforce_limits)
        self.lmp_ = self.solution_.lmp
        self.mu_ = self.solution_.mu
        self.objective_ = self.solution_.objective
        return self

    def predict(self, in_service):
        check_is_fitted(self, "model_")
        masks = np.atleast_2d(np.asarray(in_service, dtype=bool))
        if masks.shape[1] != self.case_.n_lines:
            raise ValueError(f"expected {self.case_.n_lines} line statuses per row")
        return np.array([
            self.model_.solve(m, enforce_limits=self.enforce_limits).objective for m in masks
        ])


class LmpDecomposer(BaseEstimator):
    """LMP-driven split into a congested sub-grid and quiet sub-grids.

    Parameters
    ----------
    threshold_frac : float
        Stop once the cut LMP spread is at most this fraction of the grid-wide spread.
    max_iter : int, optional
        Cap on cut expansions; defaults to the bus count.
    """

    def __init__(self, threshold_frac=0.10, max_iter=None):
        self.threshold_frac = threshold_frac
        self.max_iter = max_iter

    def fit(self, case, y=None, solution=None):
        check_fraction("threshold_frac", self.threshold_frac)
        self.case_ = check_case(case)
        sol = solution if solution is not None else dcopf.solve_dcopf(self.case_)
        if not sol.optimal:
            raise topocontrol.InfeasibleBaseCaseError("DCOPF is infeasible")
        self.solution_ = sol
        self.decomposition_ = graphdecomp.decompose_by_lmp(
            self.case_, sol, threshold_frac=self.threshold_frac, max_iter=self.max_iter
        )
        self.cut_ = self.decomposition_.cut
        return self

    def transform(self, buses):
        """Label each bus: 0 congested interior, -1 cut, k >= 1 the k-th quiet sub-grid."""
        check_is_fitted(self, "decomposition_")
        d = self.decomposition_
        labels = {}
        for i, comp in enumerate(d.components):
            for b in comp.interior:
                labels[b] = i
        for b in d.cut:
            labels[b] = -1
        return np.array([labels[b] for b in check_bus_ids(self.case_, buses)])


class GreedySwitching(BaseEstimator):
    """Greedy line switching, over the whole grid or the congested sub-grid.

    ``fit`` produces ``plan_``; ``transform`` returns the case with the plan's
    lines switched out.
    """

    def __init__(self, heuristic="standard", threshold_frac=0.10, max_iter=50, min_saving=1e-3):
        self.heuristic = heuristic
        self.threshold_frac = threshold_frac
        self.max_iter = max_iter
        self.min_saving = min_saving

    def fit(self, case, y=None):
        self.case_ = check_case(case)
        if self.heuristic == "standard":
            self.plan_ = topocontrol.standard_greedy(self.case_, self.max_iter, self.min_saving)
        elif self.heuristic == "local":
            check_fraction("threshold_frac", self.threshold_frac)
            self.plan_ = topocontrol.local_greedy(
                self.case_, self.threshold_frac, self.max_iter, self.min_saving
            )
        else:
            raise ValueError(f"heuristic must be 'standard' or 'local', got {self.heuristic!r}")
        return self

    def transform(self, case=None) -> GridCase:
        check_is_fitted(self, "plan_")
        return topocontrol.apply_plan(self.case_ if case is None else check_case(case), self.plan_)
