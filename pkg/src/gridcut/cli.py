"""Command line entry point: ``gridcut {solve,sens,decompose,switch,bench}``.

Exit status is 0 on success, 2 when the DCOPF is infeasible and 1 on any
input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings

from gridcut import bench, graphdecomp, sensitivity, topocontrol
from gridcut._validation import check_case, check_fraction
from gridcut.dcflow import DisconnectedNetworkError
from gridcut.dcopf import solve_dcopf
from gridcut.netmodel import CaseParseError, CaseValidationError, CaseWarning, perturb_gencosts

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2


class Infeasible(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors, not infeasibility
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _case(args):
    case = check_case(args.case)
    spread = getattr(args, "spread", 0.0) or 0.0
    if args.seed is not None and spread > 0:
        case = perturb_gencosts(case, args.seed, check_fraction("spread", spread, hi_open=True))
    return case


def _rows_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _solved(case):
    sol = solve_dcopf(case)
    if not sol.optimal:
        raise Infeasible("DCOPF is infeasible")
    return sol


def cmd_solve(args):
    case = _case(args)
    sol = _solved(case)
    if args.format == "json":
        return sol.to_json()
    rows = [("bus", b, "lmp", repr(float(v))) for b, v in zip(sol.bus_ids, sol.lmp)]
    rows += [("line", k, "flow", repr(float(v))) for k, v in zip(sol.line_ids, sol.flows)]
    rows += [("line", k, "mu", repr(float(v))) for k, v in zip(sol.line_ids, sol.mu)]
    rows += [("generator", g, "dispatch", repr(float(v))) for g, v in zip(sol.gen_ids, sol.dispatch)]
    return _rows_csv(["kind", "id", "quantity", "value"], rows)


def cmd_sens(args):
    case = _case(args)
    psi = sensitivity.shift_factor_matrix(case)
    if args.matrix == "psi":
        if args.format == "csv":
            return sensitivity.shift_factors_to_csv(psi)
        return json.dumps({
            "reference_bus": psi.reference_bus,
            "line_ids": list(psi.line_ids),
            "bus_ids": list(psi.bus_ids),
            "values": psi.values.tolist(),
        }, indent=1)
    lodf = sensitivity.lodf_matrix(case, psi)
    if args.format == "csv":
        return sensitivity.lodf_to_csv(lodf)
    return json.dumps({
        "line_ids": list(lodf.line_ids),
        "undefined": [int(k) for k, u in zip(lodf.line_ids, lodf.undefined) if u],
        "values": [[None if v != v else float(v) for v in row] for row in lodf.values],
    }, indent=1)


def cmd_decompose(args):
    case = _case(args)
    sol = _solved(case)
    frac = check_fraction("threshold", args.threshold)
    d = graphdecomp.decompose_by_lmp(case, sol, threshold_frac=frac)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(graphdecomp.to_dot(graphdecomp.Graph.from_case(case), d))
    comps = [
        {"role": "congested" if i == d.congested else "quiet",
         "interior": sorted(c.interior), "lines": sorted(c.lines)}
        for i, c in enumerate(d.components)
    ]
    if args.format == "csv":
        rows = [(b, "cut") for b in sorted(d.cut)]
        for i, c in enumerate(comps):
            role = "congested" if c["role"] == "congested" else f"quiet{i}"
            rows += [(b, role) for b in c["interior"]]
        return _rows_csv(["bus_id", "role"], sorted(rows))
    return json.dumps({
        "cut": sorted(d.cut),
        "congested_lines": sorted(d.congested_line_ids),
        "cut_ranges": list(d.cut_ranges),
        "iterations": d.iterations,
        "components": comps,
        "discretionary": {str(k): v for k, v in sorted(d.discretionary.items())},
    }, indent=1)


def cmd_switch(args):
    case = _case(args)
    heuristic = args.heuristic or "standard"
    if heuristic not in ("standard", "local"):
        raise ValueError("--heuristic must be 'standard' or 'local' for switch")
    try:
        if heuristic == "standard":
            plan = topocontrol.standard_greedy(case, args.max_iter)
        else:
            frac = check_fraction("threshold", args.threshold)
            plan = topocontrol.local_greedy(case, frac, args.max_iter)
    except topocontrol.InfeasibleBaseCaseError as exc:
        raise Infeasible(str(exc)) from None
    if args.format == "json":
        return plan.to_json()
    rows = [(0, "", repr(plan.objectives[0]), 1)]
    rows += [
        (k + 1, lid, repr(obj), n)
        for k, (lid, obj, n) in enumerate(zip(plan.outages, plan.objectives[1:], plan.solves))
    ]
    return _rows_csv(["step", "line_id", "objective", "solves"], rows)


def cmd_bench(args):
    if args.heuristic in (None, "both"):
        heuristics = bench.HEURISTICS
    else:
        heuristics = (args.heuristic,)
    cfg = bench.BenchConfig(
        case=args.case, samples=args.samples, spread=args.spread,
        seed=0 if args.seed is None else args.seed, threshold_frac=args.threshold,
        heuristics=heuristics,
    )
    case = check_case(args.case)
    if not solve_dcopf(case).optimal:
        raise Infeasible("base DCOPF is infeasible")
    report = bench.run_monte_carlo(cfg, case)
    return report.to_csv() if args.format == "csv" else report.to_json()


def build_parser():
    p = _Parser(prog="gridcut", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spread_default=0.0):
        sp.add_argument("--case", default="ieee118",
                        help="MATPOWER .m or JSON case file, or 'ieee118' (default)")
        sp.add_argument("--seed", type=int, default=None,
                        help="seed for the generator-cost perturbation")
        sp.add_argument("--spread", type=float, default=spread_default,
                        help="relative cost perturbation half-width in [0, 1)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--out", default=None, help="write here instead of stdout")

    s = sub.add_parser("solve", help="DCOPF dispatch, LMPs and shadow prices")
    common(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sens", help="export shift factors or LODFs")
    common(s)
    s.add_argument("--matrix", choices=("psi", "lodf"), default="psi")
    s.set_defaults(func=cmd_sens)

    s = sub.add_parser("decompose", help="LMP-driven decomposition")
    common(s)
    s.add_argument("--threshold", type=float, default=0.10,
                   help="cut LMP spread target as a fraction of the grid spread")
    s.add_argument("--dot", default=None, help="also write a Graphviz DOT file")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("switch", help="greedy switching plan")
    common(s)
    s.add_argument("--heuristic", choices=("standard", "local"), default="standard")
    s.add_argument("--threshold", type=float, default=0.10)
    s.add_argument("--max-iter", type=int, default=50)
    s.set_defaults(func=cmd_switch)

    s = sub.add_parser("bench", help="Monte Carlo Standard vs Local comparison")
    common(s, spread_default=0.3)
    s.add_argument("--samples", type=int, default=50)
    s.add_argument("--threshold", type=float, default=0.10)
    s.add_argument("--heuristic", choices=("standard", "local", "both"), default="both")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", CaseWarning)
            text = args.func(args)
    except Infeasible as exc:
        print(f"gridcut: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CaseParseError, CaseValidationError, DisconnectedNetworkError, OSError,
            ValueError, KeyError) as exc:
        print(f"gridcut: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
