"""DC optimal power flow as an LP, with LMPs and line shadow prices.

Angles and line flows are both variables, so the nodal balance rows carry
the LMPs and the flow bounds carry the line shadow prices::

    min  sum_s price_s * x_s
    s.t. sum_{s at i} x_s - sum_{k out of i} f_k + sum_{k into i} f_k = load_i   (lambda_i)
         f_k - base * b_k (theta_f - theta_t) = 0
         -limit_k <= f_k <= limit_k                                           (mu_k)
         theta_ref = 0,  generator bounds

``x_s`` are generator output blocks (one per generator, or one per
piecewise-linear cost segment).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from gridcut.dcflow import DisconnectedNetworkError
from gridcut.lp import LinearProgram
from gridcut.netmodel import GridCase, is_connected

__all__ = [
    "OpfSolution",
    "MasReport",
    "OpfModel",
    "solve_dcopf",
    "lmp_via_shift_factors",
    "mas",
    "congested_lines",
    "dual_is_stable",
]


@dataclass(frozen=True, eq=False)
class OpfSolution:
    """Result of one DCOPF solve.

    ``mu`` holds non-negative shadow prices of the line limits.  ``mu_signed``
    carries the direction of the binding limit (positive when the from->to
    limit binds); it is the vector that enters the LMP decomposition
    ``lmp = lmp_ref - psi.T @ mu_signed``.
    """

    status: str
    objective: float
    dispatch: np.ndarray
    flows: np.ndarray
    theta: np.ndarray
    lmp: np.ndarray
    mu: np.ndarray
    mu_signed: np.ndarray
    bus_ids: tuple[int, ...]
    line_ids: tuple[int, ...]
    gen_ids: tuple[int, ...]
    reference_bus: int
    limits: np.ndarray

    @property
    def optimal(self):
        return self.status == "optimal"

    @property
    def lmp_ref(self):
        return float(self.lmp[self.bus_ids.index(self.reference_bus)])

    def lmp_at(self, bus_id):
        return float(self.lmp[self.bus_ids.index(bus_id)])

    def to_dict(self):
        def arr(a):
            return None if a is None else [None if not np.isfinite(v) else float(v) for v in a]

        return {
            "status": self.status,
            "objective": float(self.objective) if self.optimal else None,
            "reference_bus": self.reference_bus,
            "dispatch": dict(zip(map(str, self.gen_ids), arr(self.dispatch))),
            "flows": dict(zip(map(str, self.line_ids), arr(self.flows))),
            "lmp": dict(zip(map(str, self.bus_ids), arr(self.lmp))),
            "mu": dict(zip(map(str, self.line_ids), arr(self.mu))),
        }

    def to_json(self, indent=1):
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True)
class MasReport:
    constrained_cost: float
    unconstrained_cost: float
    mas: float
    feasible: bool = True


class OpfModel:
    """Persistent DCOPF for one case under varying line statuses.

    Line flows are explicit variables tied to the angles by one row per line,
    so taking a line out only changes bounds (flow fixed at zero, its
    defining row freed) and HiGHS restarts from the previous basis.
    """

    def __init__(self, case: GridCase, costs=None):
        self.case = case
        gens = case.generators
        base_costs = case.gen_costs if costs is None else np.asarray(costs, dtype=float)
        seg_gen, lo, hi, price = [], [], [], []
        for g_i, g in enumerate(gens):
            if g.cost_segments:
                scale = base_costs[g_i] / g.cost if g.cost else 1.0
                for s_i, (w, c) in enumerate(g.cost_segments):
                    seg_gen.append(g_i)
                    lo.append(g.p_min if s_i == 0 else 0.0)
                    hi.append(g.p_min + w if s_i == 0 else w)
                    price.append(c * scale)
            else:
                seg_gen.append(g_i)
                lo.append(g.p_min)
                hi.append(g.p_max)
                price.append(base_costs[g_i])
        self.seg_gen = np.array(seg_gen, dtype=int)
        ns, nb, nl = len(seg_gen), case.n_buses, case.n_lines
        self.n_seg = ns
        self._theta0 = ns
        self._flow0 = ns + nb

        w = case.base_mva * case.susceptances
        k = np.arange(nl)
        rows = np.concatenate([
            case.gen_bus_idx[self.seg_gen],      # generation into its bus
            case.from_idx, case.to_idx,          # flow leaves from-bus, enters to-bus
            nb + k, nb + k, nb + k,              # f_k - w_k (theta_f - theta_t) = 0
        ])
        cols = np.concatenate([
            np.arange(ns),
            self._flow0 + k, self._flow0 + k,
            self._flow0 + k, self._theta0 + case.from_idx, self._theta0 + case.to_idx,
        ])
        vals = np.concatenate([np.ones(ns), -np.ones(nl), np.ones(nl), np.ones(nl), -w, w])
        A = sp.csc_matrix((vals, (rows, cols)), shape=(nb + nl, ns + nb + nl))

        col_lo = np.concatenate([lo, np.full(nb, -np.inf), np.zeros(nl)])
        col_hi = np.concatenate([hi, np.full(nb, np.inf), np.zeros(nl)])
        ref = case.bus_index[case.reference_bus]
        col_lo[self._theta0 + ref] = col_hi[self._theta0 + ref] = 0.0
        row_lo = np.concatenate([case.loads, np.full(nl, -np.inf)])
        row_hi = np.concatenate([case.loads, np.full(nl, np.inf)])
        c = np.concatenate([price, np.zeros(nb + nl)])
        self._lp = LinearProgram(c, A, row_lo, row_hi, col_lo, col_hi)
        # every line starts out of the model; solve() switches them in
        self._on = np.zeros(nl, dtype=bool)
        self._limited = np.zeros(nl, dtype=bool)

    def _sync(self, on, enforce_limits):
        case = self.case
        nb = case.n_buses
        lim = np.where(enforce_limits, case.limits, np.inf)
        want_lim = on & np.isfinite(lim)
        for k in np.flatnonzero((on != self._on) | (want_lim != self._limited)):
            if on[k]:
                self._lp.set_col_bounds(self._flow0 + k, -lim[k], lim[k])
                self._lp.set_row_bounds(nb + k, 0.0, 0.0)
            else:
                self._lp.set_col_bounds(self._flow0 + k, 0.0, 0.0)
                self._lp.set_row_bounds(nb + k, -np.inf, np.inf)
        self._on = on.copy()
        self._limited = want_lim

    def solve(self, in_service=None, enforce_limits=True) -> OpfSolution:
        case = self.case
        on = case.in_service if in_service is None else np.asarray(in_service, dtype=bool)
        self._sync(on, enforce_limits)
        res = self._lp.solve()
        nl, nb = case.n_lines, case.n_buses
        ids = dict(
            bus_ids=tuple(int(b) for b in case.bus_ids),
            line_ids=tuple(int(k) for k in case.line_ids),
            gen_ids=tuple(g.id for g in case.generators),
            reference_bus=case.reference_bus,
            limits=np.where(on & enforce_limits, case.limits, np.inf),
        )
        if not res.optimal:
            nan = np.full
            return OpfSolution(
                "infeasible", float("nan"), nan(len(case.generators), np.nan),
                nan(nl, np.nan), nan(nb, np.nan), nan(nb, np.nan), nan(nl, np.nan),
                nan(nl, np.nan), **ids,
            )
        x = res.x
        dispatch = np.bincount(
            self.seg_gen, weights=x[: self.n_seg], minlength=len(case.generators)
        )
        theta = x[self._theta0:self._flow0]
        flows = np.where(on, x[self._flow0:], 0.0)
        mu_signed = np.where(self._limited, -res.col_duals[self._flow0:], 0.0)
        return OpfSolution(
            "optimal", res.objective, dispatch, flows, theta, res.row_duals[:nb].copy(),
            np.abs(mu_signed), mu_signed, **ids,
        )


def solve_dcopf(case: GridCase, enforce_limits=True) -> OpfSolution:
    """Least-cost dispatch for ``case``; infeasibility is reported in ``status``."""
    if not is_connected(case):
        raise DisconnectedNetworkError("DCOPF requires a connected in-service network")
    return OpfModel(case).solve(enforce_limits=enforce_limits)


def lmp_via_shift_factors(psi, mu, lmp_ref):
    """LMPs rebuilt from the reference price and congestion charges.

    ``lmp_i = lmp_ref - sum_j mu_j * psi[j, i]`` with ``mu`` the signed
    line shadow prices (see :attr:`OpfSolution.mu_signed`).
    """
    values = getattr(psi, "values", psi)
    mu = np.asarray(mu, dtype=float)
    if values.shape[0] != mu.shape[0]:
        raise ValueError(
            f"shift factors have {values.shape[0]} lines but {mu.shape[0]} shadow prices given"
        )
    return lmp_ref - values.T @ mu


def mas(case: GridCase) -> MasReport:
    """Maximum attainable savings: constrained minus unconstrained DCOPF cost."""
    model = OpfModel(case)
    con = model.solve(enforce_limits=True)
    unc = model.solve(enforce_limits=False)
    if not con.optimal or not unc.optimal:
        return MasReport(con.objective, unc.objective, float("nan"), feasible=False)
    return MasReport(con.objective, unc.objective, con.objective - unc.objective)


def congested_lines(sol: OpfSolution, eps=1e-6, mu_tol=1e-6, base_mva=100.0):
    """Line ids at their limit (slack within ``eps`` per-unit) or with ``mu > mu_tol``."""
    if not sol.optimal:
        raise ValueError("congestion is only defined for an optimal solution")
    slack = sol.limits - np.abs(sol.flows)
    hit = (slack <= eps * base_mva) | (sol.mu > mu_tol)
    return {lid for lid, h in zip(sol.line_ids, hit) if h}


def dual_is_stable(case: GridCase, sol: OpfSolution | None = None, rel=1e-6, rtol=1e-5, seed=0):
    """True if the LMPs survive small load perturbations in both directions.

    A non-unique dual (degenerate primal) shows up as LMPs that jump when the
    loads move slightly up versus down.
    """
    if sol is None:
        sol = solve_dcopf(case)
    if not sol.optimal:
        return False
    rng = np.random.default_rng(seed)
    scale = max(np.abs(sol.lmp).max(), 1.0)
    shape = rng.uniform(0.5, 1.0, size=case.n_buses)
    for sign in (1.0, -1.0):
        loads = case.loads * (1.0 + sign * rel * shape)
        moved = case.replace(buses=tuple(
            dataclasses.replace(b, load=float(d)) for b, d in zip(case.buses, loads)
        ))
        other = OpfModel(moved).solve()
        if not other.optimal or np.max(np.abs(other.lmp - sol.lmp)) > rtol * scale:
            return False
    return True
