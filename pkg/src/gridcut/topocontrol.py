"""Greedy transmission switching: the standard search and its decomposition-restricted variant.

Both heuristics repeat the same step: solve a DCOPF for every allowable
single-line outage of the current topology and commit the outage that lowers
cost the most.  Standard Greedy considers every non-bridge line; Local Greedy
only the non-bridge lines of the congested sub-grid returned by
:func:`gridcut.graphdecomp.decompose_by_lmp`.  Effort is counted in DCOPF
solves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from gridcut.dcopf import OpfModel, OpfSolution, congested_lines
from gridcut.graphdecomp import Graph, NoCongestionError, bridges, decompose_by_lmp
from gridcut.netmodel import GridCase, is_connected, with_line_status

__all__ = [
    "SwitchingPlan",
    "InfeasibleBaseCaseError",
    "allowable_outages",
    "standard_greedy",
    "local_greedy",
    "apply_plan",
]


class InfeasibleBaseCaseError(ValueError):
    pass


@dataclass
class SwitchingPlan:
    """Committed outages in order, with the cost after each and the solve counts.

    ``objectives[0]`` is the base cost, ``objectives[k]`` the cost after the
    ``k``-th outage.  ``solves[k]`` counts the DCOPFs spent to choose outage
    ``k+1`` (the last entry covers the final, unsuccessful search).
    """

    heuristic: str
    outages: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    solves: list = field(default_factory=list)
    base_solves: int = 1
    final: OpfSolution | None = None
    stop_reason: str = ""

    @property
    def total_solves(self):
        return self.base_solves + sum(self.solves)

    @property
    def saving(self):
        return self.objectives[0] - self.objectives[-1] if self.objectives else 0.0

    @property
    def n_removed(self):
        return len(self.outages)

    def to_dict(self):
        return {
            "heuristic": self.heuristic,
            "outages": [int(x) for x in self.outages],
            "objectives": [float(x) for x in self.objectives],
            "solves_per_step": [int(x) for x in self.solves],
            "total_solves": int(self.total_solves),
            "saving": float(self.saving),
            "stop_reason": self.stop_reason,
        }

    def to_json(self, indent=1):
        return json.dumps(self.to_dict(), indent=indent)


def _non_bridges(case: GridCase, on):
    g = Graph(
        (b.id for b in case.buses),
        ((ln.id, ln.from_bus, ln.to_bus) for ln, o in zip(case.lines, on) if o),
    )
    return {lid for lid in g.edges} - bridges(g)


def allowable_outages(case: GridCase, restrict_to=None) -> set:
    """In-service lines whose removal keeps the network connected."""
    out = _non_bridges(case, case.in_service)
    if restrict_to is not None:
        out &= set(restrict_to)
    return out


def _current_case(case, on):
    out = case
    for lid, o0, o in zip(case.line_ids, case.in_service, on):
        if o0 != o:
            out = with_line_status(out, int(lid), bool(o))
    return out


def _greedy(case: GridCase, heuristic, candidates_fn, max_iter, min_saving, stop_if_uncongested):
    model = OpfModel(case)
    on = case.in_service.copy()
    sol = model.solve(on)
    if not sol.optimal:
        raise InfeasibleBaseCaseError("base DCOPF is infeasible")
    plan = SwitchingPlan(heuristic, objectives=[sol.objective])
    index = case.line_index
    while True:
        if len(plan.outages) >= max_iter:
            plan.stop_reason = "max_iter"
            break
        if stop_if_uncongested and not congested_lines(sol, base_mva=case.base_mva):
            plan.stop_reason = "no congestion"
            break
        cands = sorted(candidates_fn(on, sol))
        best = None
        for lid in cands:
            trial = on.copy()
            trial[index[lid]] = False
            s = model.solve(trial)
            if not s.optimal:
                continue
            if best is None or s.objective < best[1].objective:
                best = (lid, s)
        plan.solves.append(len(cands))
        if best is None or sol.objective - best[1].objective <= min_saving:
            plan.stop_reason = "no improving switch"
            break
        lid, sol = best
        on[index[lid]] = False
        plan.outages.append(lid)
        plan.objectives.append(sol.objective)
    plan.final = sol
    return plan


def standard_greedy(case: GridCase, max_iter=50, min_saving=1e-3) -> SwitchingPlan:
    """Switch out, one at a time, the line whose outage saves the most.

    Every connectivity-preserving outage is evaluated each round; candidates
    that make the DCOPF infeasible are skipped but still counted.  Ties go to
    the lowest line id.  Stops when no outage saves more than ``min_saving``
    ($/h).
    """

    def candidates(on, sol):
        return _non_bridges(case, on)

    return _greedy(case, "standard", candidates, max_iter, min_saving, False)


def local_greedy(case: GridCase, threshold_frac=0.10, max_iter=50, min_saving=1e-3,
                 refresh=True) -> SwitchingPlan:
    """Greedy switching restricted to the congested sub-grid.

    The congested sub-grid comes from :func:`decompose_by_lmp` on the current
    dispatch and, with ``refresh`` (default), is recomputed after every
    committed outage so the search follows congestion as it moves.  The
    decomposition reuses the DCOPF already solved for the current topology.
    """
    state = {"scope": None}

    def candidates(on, sol):
        if state["scope"] is None or refresh:
            current = _current_case(case, on)
            try:
                dec = decompose_by_lmp(current, sol, threshold_frac=threshold_frac)
            except NoCongestionError:
                return set()
            state["scope"] = dec.congested_subgrid.lines
        return _non_bridges(case, on) & state["scope"]

    return _greedy(case, "local", candidates, max_iter, min_saving, True)


def apply_plan(case: GridCase, plan: SwitchingPlan) -> GridCase:
    out = case
    for lid in plan.outages:
        out = with_line_status(out, lid, False)
    if not is_connected(out):
        raise RuntimeError("plan disconnects the network")
    return out
