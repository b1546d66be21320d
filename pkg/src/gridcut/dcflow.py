"""Susceptance matrices, DC power flow and Kron reduction.

Angles are radians, injections and flows are MW.  Line susceptances are
per-unit on ``case.base_mva``, so ``flow = base * b * (theta_from - theta_to)``.
Dense linear algebra is used throughout; the supported scale is a few
thousand buses.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from gridcut.netmodel import GridCase

__all__ = [
    "SusceptanceMatrix",
    "ReducedSusceptance",
    "DcState",
    "DisconnectedNetworkError",
    "ImbalanceWarning",
    "laplacian",
    "build_susceptance",
    "reduce_reference",
    "solve_dc_flow",
    "kron_reduce",
]


class DisconnectedNetworkError(np.linalg.LinAlgError):
    """The in-service network is islanded, so angles are not determined."""


class ImbalanceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SusceptanceMatrix:
    """Weighted Laplacian ``B`` (per-unit) with the bus ids labelling its rows."""

    matrix: np.ndarray
    bus_ids: tuple[int, ...]

    def index(self, bus_id):
        return self.bus_ids.index(bus_id)

    @property
    def size(self):
        return len(self.bus_ids)


@dataclass(frozen=True, eq=False)
class ReducedSusceptance:
    """``B`` with the reference row/column removed, Cholesky-factored."""

    matrix: np.ndarray
    bus_ids: tuple[int, ...]
    reference_bus: int
    keep: np.ndarray
    cho: tuple

    def solve(self, rhs):
        return sla.cho_solve(self.cho, rhs, check_finite=False)

    def inverse(self):
        return self.solve(np.eye(self.matrix.shape[0]))


@dataclass(frozen=True)
class DcState:
    theta: np.ndarray
    injections: np.ndarray
    flows: np.ndarray
    bus_ids: tuple[int, ...]
    line_ids: tuple[int, ...]


def laplacian(n, frm, to, weights):
    """Dense weighted Laplacian for an edge list (parallel edges add up)."""
    lap = np.zeros((n, n))
    np.add.at(lap, (frm, to), -weights)
    np.add.at(lap, (to, frm), -weights)
    np.add.at(lap, (frm, frm), weights)
    np.add.at(lap, (to, to), weights)
    return lap


def build_susceptance(case: GridCase) -> SusceptanceMatrix:
    on = case.in_service
    mat = laplacian(case.n_buses, case.from_idx[on], case.to_idx[on], case.susceptances[on])
    return SusceptanceMatrix(mat, tuple(int(b) for b in case.bus_ids))


def reduce_reference(B: SusceptanceMatrix, ref_bus) -> ReducedSusceptance:
    r = B.index(ref_bus)
    keep = np.array([i for i in range(B.size) if i != r], dtype=int)
    red = B.matrix[np.ix_(keep, keep)]
    try:
        cho = sla.cho_factor(red, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise DisconnectedNetworkError(
            "reduced susceptance matrix is not positive definite "
            "(network disconnected or degenerate)"
        ) from None
    diag = np.abs(np.diag(cho[0]))
    if red.size and diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise DisconnectedNetworkError("reduced susceptance matrix is numerically singular")
    return ReducedSusceptance(red, B.bus_ids, ref_bus, keep, cho)


def solve_dc_flow(case: GridCase, injections, reduced: ReducedSusceptance | None = None) -> DcState:
    """Angles and line flows for per-bus MW injections.

    If the injections do not sum to zero the reference bus absorbs the
    mismatch and an :class:`ImbalanceWarning` is emitted.
    """
    p = np.asarray(injections, dtype=float).copy()
    if p.shape != (case.n_buses,):
        raise ValueError(f"expected {case.n_buses} injections, got shape {p.shape}")
    if reduced is None:
        reduced = reduce_reference(build_susceptance(case), case.reference_bus)
    ref = case.bus_index[reduced.reference_bus]
    residual = p.sum()
    if abs(residual) > 1e-6 * max(np.abs(p).sum(), 1.0):
        warnings.warn(
            f"injections unbalanced by {residual:.6g} MW; reference bus absorbs it",
            ImbalanceWarning,
            stacklevel=2,
        )
    p[ref] -= residual
    theta = np.zeros(case.n_buses)
    theta[reduced.keep] = reduced.solve(p[reduced.keep] / case.base_mva)
    flows = case.base_mva * case.susceptances * (theta[case.from_idx] - theta[case.to_idx])
    flows[~case.in_service] = 0.0
    return DcState(
        theta,
        p,
        flows,
        tuple(int(b) for b in case.bus_ids),
        tuple(int(k) for k in case.line_ids),
    )


def kron_reduce(B: SusceptanceMatrix, terminals) -> SusceptanceMatrix:
    """Eliminate every non-terminal bus by a Schur complement.

    The result is the Laplacian of the terminal-equivalent network: for any
    injection supported on the terminals the terminal angles (up to a common
    shift) match those of the full network.
    """
    terminals = list(dict.fromkeys(terminals))
    if not terminals:
        raise ValueError("at least one terminal is required")
    t = np.array([B.index(b) for b in terminals], dtype=int)
    interior = np.setdiff1d(np.arange(B.size), t)
    M = B.matrix
    if interior.size == 0:
        return SusceptanceMatrix(M[np.ix_(t, t)].copy(), tuple(terminals))
    Mii = M[np.ix_(interior, interior)]
    Mit = M[np.ix_(interior, t)]
    try:
        cho = sla.cho_factor(Mii, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("interior block is singular") from None
    reduced = M[np.ix_(t, t)] - Mit.T @ sla.cho_solve(cho, Mit, check_finite=False)
    reduced = 0.5 * (reduced + reduced.T)
    return SusceptanceMatrix(reduced, tuple(terminals))
