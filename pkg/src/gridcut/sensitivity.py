"""Injection shift factors, PTDFs and line outage distribution factors."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from gridcut.dcflow import (
    DisconnectedNetworkError,
    build_susceptance,
    reduce_reference,
)
from gridcut.netmodel import GridCase, is_connected, with_line_status

__all__ = [
    "ShiftFactorMatrix",
    "LodfMatrix",
    "UncontrollableCongestionError",
    "shift_factor_matrix",
    "ptdf",
    "lodf_matrix",
    "post_outage_shift_factors",
    "optimal_bus_pair",
    "shift_factors_to_csv",
    "lodf_to_csv",
]


class UncontrollableCongestionError(ValueError):
    """No candidate bus pair moves flow on the congested line."""


@dataclass(frozen=True)
class ShiftFactorMatrix:
    """Flow on each line (from -> to) per MW injected at a bus and withdrawn at the reference.

    ``values[k, j]`` is the shift factor of line ``line_ids[k]`` for bus
    ``bus_ids[j]``.  Out-of-service lines have all-zero rows.
    """

    values: np.ndarray
    bus_ids: tuple[int, ...]
    line_ids: tuple[int, ...]
    reference_bus: int
    from_bus: tuple[int, ...]
    to_bus: tuple[int, ...]

    def bus_col(self, bus_id):
        return self.bus_ids.index(bus_id)

    def line_row(self, line_id):
        return self.line_ids.index(line_id)

    def __getitem__(self, key):
        line_id, bus_id = key
        return self.values[self.line_row(line_id), self.bus_col(bus_id)]


@dataclass(frozen=True)
class LodfMatrix:
    """``values[i, j]``: share of line j's pre-outage flow that lands on line i.

    The diagonal is -1.  Columns of bridges (and out-of-service lines) are NaN
    and flagged in ``undefined``.
    """

    values: np.ndarray
    line_ids: tuple[int, ...]
    undefined: np.ndarray

    def __getitem__(self, key):
        i, j = key
        return self.values[self.line_ids.index(i), self.line_ids.index(j)]

    def predict_flows(self, flows, outage_line):
        """Post-outage flows from base flows for a single outage."""
        j = self.line_ids.index(outage_line)
        if self.undefined[j]:
            raise DisconnectedNetworkError(f"outage of line {outage_line} islands the network")
        flows = np.asarray(flows, dtype=float)
        out = flows + self.values[:, j] * flows[j]
        out[j] = 0.0
        return out


def _shift_factor_values(case: GridCase, ref_bus):
    reduced = reduce_reference(build_susceptance(case), ref_bus)
    n = case.n_buses
    on = case.in_service
    # flow_k = base*b_k*(theta_f - theta_t) with theta = B^-1 p / base, so base cancels
    X = np.zeros((n, n))
    X[np.ix_(reduced.keep, reduced.keep)] = reduced.inverse()
    psi = case.susceptances[:, None] * (X[case.from_idx] - X[case.to_idx])
    psi[~on] = 0.0
    return psi


def shift_factor_matrix(case: GridCase, ref_bus=None) -> ShiftFactorMatrix:
    if ref_bus is None:
        ref_bus = case.reference_bus
    if ref_bus not in case.bus_index:
        raise KeyError(f"unknown reference bus {ref_bus}")
    psi = _shift_factor_values(case, ref_bus)
    return ShiftFactorMatrix(
        psi,
        tuple(int(b) for b in case.bus_ids),
        tuple(int(k) for k in case.line_ids),
        ref_bus,
        tuple(ln.from_bus for ln in case.lines),
        tuple(ln.to_bus for ln in case.lines),
    )


def ptdf(psi: ShiftFactorMatrix, line_i, bus_j1, bus_j2):
    """Flow change on ``line_i`` per MW moved from ``bus_j1`` to ``bus_j2``.

    Returns ``(signed, magnitude)``; both are independent of the reference bus.
    """
    k = psi.line_row(line_i)
    signed = float(psi.values[k, psi.bus_col(bus_j1)] - psi.values[k, psi.bus_col(bus_j2)])
    return signed, abs(signed)


def lodf_matrix(case: GridCase, psi: ShiftFactorMatrix | None = None) -> LodfMatrix:
    from gridcut.graphdecomp import Graph, bridges

    if psi is None:
        psi = shift_factor_matrix(case)
    f = np.array([psi.bus_col(b) for b in psi.from_bus])
    t = np.array([psi.bus_col(b) for b in psi.to_bus])
    # ptdf_ij: flow on line i for a unit transfer across line j's terminals
    transfer = psi.values[:, f] - psi.values[:, t]
    bridge_ids = bridges(Graph.from_case(case))
    undefined = np.array(
        [(not ln.in_service) or ln.id in bridge_ids for ln in case.lines], dtype=bool
    )
    denom = 1.0 - np.diag(transfer)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = transfer / denom[None, :]
    values[:, undefined] = np.nan
    idx = np.arange(case.n_lines)
    values[idx, idx] = np.where(undefined, np.nan, -1.0)
    return LodfMatrix(values, psi.line_ids, undefined)


def post_outage_shift_factors(case: GridCase, outage_line, ref_bus=None) -> ShiftFactorMatrix:
    """Shift factors recomputed on the case with ``outage_line`` removed."""
    after = with_line_status(case, outage_line, False)
    if not is_connected(after):
        raise DisconnectedNetworkError(f"outage of line {outage_line} islands the network")
    return shift_factor_matrix(after, ref_bus)


def _pair_choice(scores, pairs, tie_rtol):
    """Index of the best-scoring pair, ties broken lexicographically."""
    best = max(scores)
    tol = tie_rtol * max(best, 1e-300)
    cands = [p for s, p in zip(scores, pairs) if s >= best - tol]
    return min(cands)


def optimal_bus_pair(psi: ShiftFactorMatrix, congested_line, overload, candidate_buses,
                     tie_rtol=1e-9, zero_tol=1e-12):
    """Bus pair that relieves ``overload`` MW on a line with the least re-dispatch.

    The pair maximises the PTDF magnitude ``|psi[i, j1] - psi[i, j2]|``; the
    injection shift required is ``overload / PTDF``.  Pairs within ``tie_rtol``
    of the best are ties and resolve to the lexicographically smallest
    ``(bus, bus)``.
    """
    buses = sorted(set(candidate_buses))
    if len(buses) < 2:
        raise ValueError("need at least two candidate buses")
    if overload < 0:
        raise ValueError("overload must be non-negative")
    k = psi.line_row(congested_line)
    row = psi.values[k]
    pairs = list(itertools.combinations(buses, 2))
    scores = [abs(row[psi.bus_col(a)] - row[psi.bus_col(b)]) for a, b in pairs]
    scale = max(np.abs(row).max(), 1.0)
    if max(scores) <= zero_tol * scale:
        raise UncontrollableCongestionError(
            f"line {congested_line} cannot be relieved from buses {buses}"
        )
    pair = _pair_choice(scores, pairs, tie_rtol)
    return pair, overload / scores[pairs.index(pair)]


def shift_factors_to_csv(psi: ShiftFactorMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["line_id", "bus_id", "value"])
    for k, line_id in enumerate(psi.line_ids):
        for j, bus_id in enumerate(psi.bus_ids):
            w.writerow([line_id, bus_id, repr(float(psi.values[k, j]))])
    return buf.getvalue()


def lodf_to_csv(lodf: LodfMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["line_i", "line_j", "value"])
    for i, li in enumerate(lodf.line_ids):
        for j, lj in enumerate(lodf.line_ids):
            v = lodf.values[i, j]
            w.writerow([li, lj, "" if np.isnan(v) else repr(float(v))])
    return buf.getvalue()
