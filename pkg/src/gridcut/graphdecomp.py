"""Cut vertices, biconnected components, vertex cut sets and LMP-driven decomposition.

A vertex cut set splits a (biconnected) grid into pseudo biconnected
components: each connected piece left after deleting the cut, with the whole
cut and its incident lines adjoined back.  Lines joining two cut buses are
discretionary and go, where possible, to a component free of congestion.

:func:`decompose_by_lmp` grows a congested sub-grid outward from the
congested lines, always pushing the cut through the bus whose LMP deviates
most from the cut average, until the LMP spread on the cut is small.
"""

from __future__ import annotations

import warnings
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from gridcut.dcflow import laplacian
from gridcut.dcopf import OpfSolution, congested_lines as _congested_lines
from gridcut.netmodel import GridCase

__all__ = [
    "Graph",
    "Component",
    "Decomposition",
    "NotAVertexCutError",
    "NoCongestionError",
    "DegeneracyWarning",
    "cut_vertices",
    "biconnected_components",
    "bridges",
    "is_vertex_cut",
    "pseudo_components",
    "decompose_by_lmp",
    "convex_weights",
    "replicating_injections",
    "lmp_range_dominance",
    "to_dot",
]


class NotAVertexCutError(ValueError):
    pass


class NoCongestionError(ValueError):
    """Raised when decomposition is requested for an uncongested dispatch."""


class DegeneracyWarning(UserWarning):
    pass


class Graph:
    """Undirected multigraph over buses; each edge keeps its line id."""

    def __init__(self, nodes, edges):
        self.nodes = sorted(set(nodes))
        self.edges = {}  # line id -> (u, v)
        self.adj = {v: [] for v in self.nodes}
        for lid, u, v in edges:
            if u not in self.adj or v not in self.adj:
                raise KeyError(f"edge {lid} references unknown node")
            self.edges[lid] = (u, v)
            self.adj[u].append((v, lid))
            self.adj[v].append((u, lid))

    @classmethod
    def from_case(cls, case: GridCase):
        return cls(
            (b.id for b in case.buses),
            ((ln.id, ln.from_bus, ln.to_bus) for ln in case.lines if ln.in_service),
        )

    def neighbors(self, v):
        return {u for u, _ in self.adj[v]}

    def components(self, removed=frozenset()):
        """Connected components (as sorted lists) after deleting ``removed`` nodes."""
        seen = set(removed)
        out = []
        for s in self.nodes:
            if s in seen:
                continue
            seen.add(s)
            comp = [s]
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w, _ in self.adj[u]:
                    if w not in seen:
                        seen.add(w)
                        comp.append(w)
                        queue.append(w)
            out.append(sorted(comp))
        return out

    def is_connected(self):
        return len(self.components()) <= 1


def _dfs_lowpoint(g: Graph):
    """Iterative Tarjan DFS yielding articulation points, bridges and edge blocks."""
    disc, low = {}, {}
    arts, brs, blocks = set(), set(), []
    counter = 0
    for root in g.nodes:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        root_children = 0
        edge_stack = []
        # frame: (node, parent edge id, iterator over adjacency)
        stack = [(root, None, iter(g.adj[root]))]
        while stack:
            u, pedge, it = stack[-1]
            advanced = False
            for w, lid in it:
                if lid == pedge:
                    continue
                if w not in disc:
                    edge_stack.append(lid)
                    disc[w] = low[w] = counter
                    counter += 1
                    if u == root:
                        root_children += 1
                    stack.append((w, lid, iter(g.adj[w])))
                    advanced = True
                    break
                if disc[w] < disc[u]:
                    edge_stack.append(lid)
                    low[u] = min(low[u], disc[w])
            if advanced:
                continue
            stack.pop()
            if not stack:
                continue
            parent = stack[-1][0]
            low[parent] = min(low[parent], low[u])
            if low[u] > disc[parent]:
                brs.add(pedge)
            if low[u] >= disc[parent]:
                if parent != root:
                    arts.add(parent)
                block = set()
                while True:
                    lid = edge_stack.pop()
                    block.add(lid)
                    if lid == pedge:
                        break
                blocks.append(frozenset(block))
        if root_children > 1:
            arts.add(root)
    return arts, brs, blocks


def cut_vertices(g: Graph) -> set:
    """Articulation points, found in linear time."""
    return _dfs_lowpoint(g)[0]


def bridges(g: Graph) -> set:
    """Line ids whose removal disconnects their component."""
    return _dfs_lowpoint(g)[1]


def biconnected_components(g: Graph) -> list[frozenset]:
    """Edge (line id) sets of the biconnected components; each line appears once."""
    blocks = _dfs_lowpoint(g)[2]
    return sorted(blocks, key=lambda b: (-len(b), min(b)))


def is_vertex_cut(g: Graph, s) -> bool:
    s = set(s)
    if not s or not s < set(g.nodes):
        return False
    return len(g.components(removed=s)) > 1


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    buses: frozenset
    interior: frozenset
    lines: frozenset


@dataclass(frozen=True)
class Decomposition:
    """A vertex cut and the sub-grids it induces.

    ``components[congested]`` is the congested sub-grid (``None`` if no
    component carries congestion); all other components are quiet.
    """

    cut: frozenset
    components: tuple[Component, ...]
    congested: int | None
    discretionary: dict = field(default_factory=dict)
    congested_line_ids: frozenset = frozenset()
    cut_ranges: tuple[float, ...] = ()

    @property
    def congested_subgrid(self) -> Component | None:
        return None if self.congested is None else self.components[self.congested]

    @property
    def quiet_subgrids(self) -> tuple[Component, ...]:
        return tuple(c for i, c in enumerate(self.components) if i != self.congested)

    @property
    def iterations(self):
        return max(len(self.cut_ranges) - 1, 0)


def _assemble(g: Graph, cut, groups, congested_ids, force_congested=None):
    """Build components from interior groups, adjoining the cut to each."""
    cut = frozenset(cut)
    owner = {}
    for ci, grp in enumerate(groups):
        for v in grp:
            owner[v] = ci
    lines = [set() for _ in groups]
    discretionary = []
    for lid, (u, v) in sorted(g.edges.items()):
        ou, ov = owner.get(u), owner.get(v)
        if ou is None and ov is None:
            discretionary.append(lid)
        else:
            lines[ou if ou is not None else ov].add(lid)
    n_cong = [len(ls & congested_ids) for ls in lines]

    assigned = {}
    if groups:
        disc_cong = [lid for lid in discretionary if lid in congested_ids]
        disc_free = [lid for lid in discretionary if lid not in congested_ids]
        for lid in disc_cong:
            if force_congested is not None:
                target = force_congested
            else:
                target = min(range(len(groups)), key=lambda i: (-n_cong[i], i))
            lines[target].add(lid)
            n_cong[target] += 1
            assigned[lid] = target
        for lid in disc_free:
            free = [i for i in range(len(groups)) if n_cong[i] == 0]
            target = free[0] if free else min(range(len(groups)), key=lambda i: (n_cong[i], i))
            lines[target].add(lid)
            assigned[lid] = target

    comps = tuple(
        Component(frozenset(grp) | cut, frozenset(grp), frozenset(ls))
        for grp, ls in zip(groups, lines)
    )
    return comps, assigned


def pseudo_components(g: Graph, cut, congested_lines=()) -> Decomposition:
    """Two-step pseudo biconnected components for a vertex cut.

    Components are numbered by their smallest bus id.  Discretionary lines
    (both ends on the cut) go to the lowest-numbered component with no
    congested line; if every component is congested, to the one with the
    fewest congested lines.  A congested discretionary line goes to the most
    congested component.
    """
    cut = frozenset(cut)
    if not is_vertex_cut(g, cut):
        raise NotAVertexCutError(f"{sorted(cut)} does not disconnect the graph")
    congested_ids = frozenset(congested_lines)
    groups = g.components(removed=cut)
    comps, assigned = _assemble(g, cut, groups, congested_ids)
    counts = [len(c.lines & congested_ids) for c in comps]
    cong = int(np.argmax(counts)) if max(counts) > 0 else None
    return Decomposition(cut, comps, cong, assigned, congested_ids)


def _lmp_lookup(case: GridCase, sol: OpfSolution):
    return {b: float(sol.lmp[i]) for i, b in enumerate(sol.bus_ids)}


def _spread(lmp, buses):
    vals = [lmp[b] for b in buses]
    return (max(vals) - min(vals)) if vals else 0.0


def decompose_by_lmp(case: GridCase, sol: OpfSolution, threshold_frac=0.10, max_iter=None,
                     congested=None, eps=1e-6, mu_tol=1e-6) -> Decomposition:
    """Grow a congested sub-grid until the LMP spread on its boundary is small.

    The initial cut is the set of end buses of the congested lines.  Each
    iteration moves the cut bus whose LMP deviates most from the cut mean into
    the interior and brings its outside neighbours onto the cut; cut buses
    with no outside neighbour are absorbed.  Stops when the cut spread is at
    or below ``threshold_frac`` times the grid-wide LMP spread (checked first),
    when every bus is absorbed, or after ``max_iter`` iterations.  LMPs come
    from ``sol`` and are not recomputed while the cut moves.
    """
    if not sol.optimal:
        raise ValueError("decomposition needs an optimal DCOPF solution")
    if congested is None:
        congested = _congested_lines(sol, eps=eps, mu_tol=mu_tol, base_mva=case.base_mva)
    congested = frozenset(congested) & frozenset(case.in_service_line_ids())
    if not congested:
        raise NoCongestionError("no congested lines; the grid needs no decomposition")
    g = Graph.from_case(case)
    lmp = _lmp_lookup(case, sol)
    threshold = threshold_frac * (max(lmp.values()) - min(lmp.values()))
    if max_iter is None:
        max_iter = len(g.nodes)

    interior = set()
    cut = set()
    for lid in congested:
        cut.update(g.edges[lid])
    region = set(cut)

    def prune():
        for v in sorted(cut):
            if g.neighbors(v) <= region:
                cut.discard(v)
                interior.add(v)

    prune()
    ranges = [_spread(lmp, cut)]
    it = 0
    while cut:
        if threshold_frac > 0 and ranges[-1] <= threshold:
            break
        if it >= max_iter:
            break
        mean = np.mean([lmp[b] for b in cut])
        dev = {b: abs(lmp[b] - mean) for b in cut}
        top = max(dev.values())
        bus = min(b for b in cut if dev[b] == top)
        cut.discard(bus)
        interior.add(bus)
        fresh = g.neighbors(bus) - region
        cut |= fresh
        region |= fresh
        prune()
        ranges.append(_spread(lmp, cut))
        it += 1

    quiet_groups = g.components(removed=region)
    groups = [sorted(interior)] + quiet_groups
    comps, assigned = _assemble(g, cut, groups, congested, force_congested=0)
    # quiet cut-to-cut lines prefer a quiet component; with none left they stay inside
    return Decomposition(frozenset(cut), comps, 0, assigned, congested, tuple(ranges))


# ---------------------------------------------------------------------------


def _quiet_system(case: GridCase, cut, bus, region=None):
    """Interior of the quiet piece holding ``bus`` and its grounded Laplacian blocks."""
    g = Graph.from_case(case)
    cut = frozenset(cut)
    if bus in cut:
        raise ValueError(f"bus {bus} lies on the cut")
    piece = next(c for c in g.components(removed=cut) if bus in c)
    if region is not None and set(piece) & set(region):
        raise NotAVertexCutError(f"cut does not separate bus {bus} from the congested sub-grid")
    on = case.in_service
    L = laplacian(case.n_buses, case.from_idx[on], case.to_idx[on], case.susceptances[on])
    q = np.array([case.bus_index[b] for b in piece], dtype=int)
    c_ids = sorted(cut)
    c = np.array([case.bus_index[b] for b in c_ids], dtype=int)
    return piece, q, c_ids, L[np.ix_(q, q)], L[np.ix_(c, q)]


def convex_weights(case: GridCase, cut, bus, congested_subgrid=None):
    """Weights ``a`` over the (sorted) cut buses replicating a unit injection at ``bus``.

    With every cut bus held at a common angle, a unit injection at ``bus``
    drains into the cut; ``a_k`` is the share arriving at cut bus ``k``.
    Moving the unit from ``bus`` to the cut in those shares leaves every flow
    outside the quiet piece unchanged, so ``lmp[bus] = a @ lmp[cut]`` when
    the piece is uncongested.  Returns ``(cut_bus_ids, a)``.
    """
    region = None
    if congested_subgrid is not None:
        region = getattr(congested_subgrid, "interior", congested_subgrid)
    piece, q, c_ids, Lqq, Lcq = _quiet_system(case, cut, bus, region)
    e = np.zeros(len(piece))
    e[piece.index(bus)] = 1.0
    theta = sla.solve(Lqq, e, assume_a="pos")
    return c_ids, -Lcq @ theta


def replicating_injections(case: GridCase, cut, injections):
    """Cut injections that reproduce, outside a quiet piece, the effect of ``injections``.

    ``injections`` maps bus id -> MW and must sit on buses of quiet pieces
    (off the cut).  Returns a dict cut bus -> MW.  Negating the result
    cancels the remote injections instead.
    """
    out = defaultdict(float)
    for bus, mw in injections.items():
        if mw == 0:
            continue
        c_ids, a = convex_weights(case, cut, bus)
        for b, w in zip(c_ids, a):
            out[b] += w * mw
    return dict(out)


@dataclass(frozen=True)
class DominanceReport:
    cut_range: float
    quiet_ranges: tuple[float, ...]
    dominant: bool
    extremal_pair: tuple[int, int] | None
    violations: tuple[int, ...] = ()


def lmp_range_dominance(case: GridCase, sol: OpfSolution, cut, decomposition=None,
                        tol=1e-6) -> DominanceReport:
    """Compare the LMP spread on the cut with the spread inside each quiet sub-grid.

    Quiet-side LMPs should be convex combinations of cut LMPs; any quiet bus
    outside ``[min, max]`` of the cut LMPs is reported as a violation and
    raises a :class:`DegeneracyWarning`.
    """
    lmp = _lmp_lookup(case, sol)
    cut = frozenset(cut)
    if decomposition is None:
        g = Graph.from_case(case)
        if cut >= set(g.nodes):
            return DominanceReport(_spread(lmp, cut), (), True, _extremes(lmp, cut))
        cong = _congested_lines(sol, base_mva=case.base_mva)
        decomposition = pseudo_components(g, cut, cong)
    else:
        cong = decomposition.congested_line_ids
    quiet = [
        c for i, c in enumerate(decomposition.components)
        if i != decomposition.congested and c.interior
    ]
    for c in quiet:
        if c.lines & cong:
            raise ValueError("congestion found outside the congested sub-grid")
    lo = min(lmp[b] for b in cut) if cut else 0.0
    hi = max(lmp[b] for b in cut) if cut else 0.0
    ranges, bad = [], []
    for c in quiet:
        ranges.append(_spread(lmp, c.interior))
        bad += [b for b in c.interior if lmp[b] < lo - tol or lmp[b] > hi + tol]
    if bad:
        warnings.warn(
            f"{len(bad)} quiet buses priced outside the cut LMP range; "
            "the dual solution is probably degenerate",
            DegeneracyWarning,
            stacklevel=2,
        )
    return DominanceReport(
        hi - lo, tuple(ranges), not bad, _extremes(lmp, cut), tuple(sorted(bad))
    )


def _extremes(lmp, buses):
    if not buses:
        return None
    lo = min(buses, key=lambda b: (lmp[b], b))
    hi = max(buses, key=lambda b: (lmp[b], -b))
    return (lo, hi)


def to_dot(g: Graph, decomp: Decomposition, name="decomposition") -> str:
    """Graphviz DOT text: cut buses in red, lines coloured by component."""
    palette = ["black", "blue", "darkgreen", "orange", "purple", "brown", "cyan4", "gold4"]
    owner = {}
    for i, comp in enumerate(decomp.components):
        for lid in comp.lines:
            owner[lid] = i
    out = [f"graph {name} {{", "  node [shape=circle];"]
    for v in g.nodes:
        attrs = ' color=red style=filled fillcolor="#ffcccc"' if v in decomp.cut else ""
        out.append(f"  {v} [label=\"{v}\"{attrs}];")
    for lid, (u, v) in sorted(g.edges.items()):
        i = owner.get(lid)
        color = "gray" if i is None else palette[i % len(palette)]
        style = " penwidth=3" if lid in decomp.congested_line_ids else ""
        out.append(f"  {u} -- {v} [label=\"{lid}\" color={color}{style}];")
    out.append("}")
    return "\n".join(out) + "\n"
