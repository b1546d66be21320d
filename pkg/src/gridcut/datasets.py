"""Bundled and synthetic grid cases."""

from __future__ import annotations

import dataclasses
import warnings
from importlib import resources

import numpy as np

from gridcut.netmodel import Bus, CaseWarning, Generator, GridCase, Line, parse_matpower

__all__ = [
    "IEEE118_LINE_LIMIT",
    "IEEE118_TRANSFORMER_LIMIT",
    "load_ieee118_raw",
    "load_ieee118",
    "make_two_bus",
    "make_triangle",
    "make_path",
    "make_random_case",
    "make_congested_case",
    "make_block_chain",
]

# The published IEEE 118 data carries no MVA ratings.  These uniform ratings
# give a congested but feasible base case; transformers get the larger value.
IEEE118_LINE_LIMIT = 175.0
IEEE118_TRANSFORMER_LIMIT = 500.0

_TAP_COL = 8


def _case118_text():
    return resources.files("gridcut.data").joinpath("case118.m").read_text()


def load_ieee118_raw() -> GridCase:
    """IEEE 118-bus case exactly as in the MATPOWER file (no line ratings).

    Quadratic costs are linearised at ``p_max / 2``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CaseWarning)
        return parse_matpower(_case118_text(), name="case118")


def _transformer_mask():
    from gridcut.netmodel import _read_matrices

    _, mats = _read_matrices(_case118_text())
    return np.array([row[_TAP_COL] != 0 for row, _ in mats["branch"]], dtype=bool)


def load_ieee118(line_limit=IEEE118_LINE_LIMIT, transformer_limit=IEEE118_TRANSFORMER_LIMIT) -> GridCase:
    """IEEE 118-bus case with uniform thermal ratings for switching studies."""
    raw = load_ieee118_raw()
    xf = _transformer_mask()
    lines = tuple(
        dataclasses.replace(ln, limit=float(transformer_limit if t else line_limit))
        for ln, t in zip(raw.lines, xf)
    )
    return raw.replace(lines=lines, name="ieee118")


# ---------------------------------------------------------------------------


def make_two_bus(limit=150.0, load=100.0, costs=(10.0, 20.0), susceptance=10.0) -> GridCase:
    """Cheap generator at bus 1, expensive generator and the load at bus 2."""
    return GridCase(
        (Bus(1, 0.0, False), Bus(2, load, True)),
        (Line(1, 1, 2, susceptance, limit),),
        (Generator(1, 1, 0.0, 200.0, costs[0]), Generator(2, 2, 0.0, 200.0, costs[1])),
        name="two-bus",
    )


def make_triangle(susceptance=1.0, loads=(0.0, 0.0, 0.0), limits=None) -> GridCase:
    """Buses 1, 2, 3 with lines 1-2 (id 1), 2-3 (id 2), 1-3 (id 3); bus 3 is the reference."""
    limits = limits or (None, None, None)
    return GridCase(
        tuple(Bus(i + 1, loads[i], i == 2) for i in range(3)),
        (
            Line(1, 1, 2, susceptance, limits[0]),
            Line(2, 2, 3, susceptance, limits[1]),
            Line(3, 1, 3, susceptance, limits[2]),
        ),
        (Generator(1, 1, 0.0, 1000.0, 10.0),),
        name="triangle",
    )


def make_path(n=3, susceptance=1.0) -> GridCase:
    """Path 1 - 2 - ... - n with the reference at bus n."""
    return GridCase(
        tuple(Bus(i, 0.0, i == n) for i in range(1, n + 1)),
        tuple(Line(i, i, i + 1, susceptance) for i in range(1, n)),
        (Generator(1, 1, 0.0, 1000.0, 10.0),),
        name=f"path{n}",
    )


def _random_edges(n, extra, rng):
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    tries = 0
    while len(edges) < n - 1 + extra and tries < 50 * n:
        a, b = (int(v) for v in rng.choice(n, size=2, replace=False))
        edges.add((min(a, b), max(a, b)))
        tries += 1
    return sorted(edges)


def make_random_case(n_buses=15, extra_edges=None, n_gens=None, seed=None, *,
                     susceptance_range=(2.0, 20.0), limit=None) -> GridCase:
    """Random connected grid: a random spanning tree plus ``extra_edges`` chords.

    Bus ids run 1..n, bus 1 is the reference.  Loads are U(0, 100) MW and
    generators (at distinct random buses) have enough total capacity to cover
    twice the load.
    """
    rng = np.random.default_rng(seed)
    if extra_edges is None:
        extra_edges = n_buses // 2 + 1
    if n_gens is None:
        n_gens = max(2, n_buses // 4)
    edges = _random_edges(n_buses, extra_edges, rng)
    b = rng.uniform(*susceptance_range, size=len(edges))
    loads = rng.uniform(0.0, 100.0, size=n_buses)
    gen_buses = rng.choice(n_buses, size=min(n_gens, n_buses), replace=False)
    cap = 2.0 * loads.sum() / len(gen_buses)
    costs = rng.uniform(10.0, 50.0, size=len(gen_buses))
    return GridCase(
        tuple(Bus(i + 1, float(loads[i]), i == 0) for i in range(n_buses)),
        tuple(
            Line(k + 1, u + 1, v + 1, float(b[k]), limit) for k, (u, v) in enumerate(edges)
        ),
        tuple(
            Generator(k + 1, int(gb) + 1, 0.0, float(cap), float(c))
            for k, (gb, c) in enumerate(zip(gen_buses, costs))
        ),
        name=f"random{n_buses}-{seed}",
    )


def make_congested_case(n_buses=15, seed=None, tighten=0.6, n_tight=2, **kwargs) -> GridCase:
    """Random case whose ``n_tight`` busiest lines are rated at ``tighten`` x their uncongested flow.

    Every other line is left unbounded, so congestion is confined to the
    tightened lines.
    """
    from gridcut.dcopf import solve_dcopf

    case = make_random_case(n_buses, seed=seed, **kwargs)
    free = solve_dcopf(case, enforce_limits=False)
    order = np.argsort(-np.abs(free.flows), kind="stable")[:n_tight]
    lines = list(case.lines)
    for k in order:
        lines[k] = dataclasses.replace(lines[k], limit=float(tighten * abs(free.flows[k])))
    return case.replace(lines=tuple(lines), name=f"congested{n_buses}-{seed}")


def make_block_chain(n_blocks=3, block_size=4, seed=None) -> GridCase:
    """Cycles of ``block_size`` buses chained at shared articulation buses.

    Block ``k`` shares its first bus with the last bus of block ``k - 1``, so
    the biconnected components are exactly the cycles.  Each block gets a
    random chord when ``block_size >= 4``.
    """
    rng = np.random.default_rng(seed)
    buses, lines = [1], []
    start = 1
    lid = 1
    for _ in range(n_blocks):
        ring = [start] + list(range(buses[-1] + 1, buses[-1] + block_size))
        buses.extend(ring[1:])
        for a, b in zip(ring, ring[1:] + ring[:1]):
            lines.append(Line(lid, a, b, float(rng.uniform(2.0, 20.0))))
            lid += 1
        if block_size >= 4:
            lines.append(Line(lid, ring[0], ring[2], float(rng.uniform(2.0, 20.0))))
            lid += 1
        start = ring[-1]
    loads = rng.uniform(0.0, 50.0, size=len(buses))
    return GridCase(
        tuple(Bus(b, float(loads[i]), i == 0) for i, b in enumerate(buses)),
        tuple(lines),
        (Generator(1, buses[0], 0.0, 1e4, 10.0), Generator(2, buses[-1], 0.0, 1e4, 20.0)),
        name=f"chain{n_blocks}x{block_size}",
    )
