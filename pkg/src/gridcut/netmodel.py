"""Grid data model, validation and case-file ingestion.

A :class:`GridCase` is an immutable bundle of buses, lines and generators.
Cases are read from either MATPOWER ``.m`` text (``mpc.bus``, ``mpc.branch``,
``mpc.gen`` and ``mpc.gencost`` tables) or the package's native JSON layout::

    {
      "name": "two-bus",
      "base_mva": 100.0,
      "buses": [{"id": 1, "load": 0.0, "is_reference": true}, ...],
      "lines": [{"id": 1, "from_bus": 1, "to_bus": 2, "susceptance": 10.0,
                 "limit": 150.0, "in_service": true}, ...],
      "generators": [{"id": 1, "at_bus": 1, "p_min": 0.0, "p_max": 200.0,
                      "cost": 10.0, "cost_segments": null}, ...]
    }

``limit: null`` means the line is unbounded.  ``cost_segments`` is an optional
list of ``[width_mw, price]`` pairs covering ``[p_min, p_max]``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
import warnings
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "Bus",
    "Line",
    "Generator",
    "GridCase",
    "Diagnostic",
    "CaseParseError",
    "CaseValidationError",
    "CaseWarning",
    "load_case",
    "loads_case",
    "parse_matpower",
    "parse_json",
    "dumps_json",
    "validate",
    "with_line_status",
    "perturb_gencosts",
]


class CaseParseError(ValueError):
    """Raised when case text cannot be parsed."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class CaseValidationError(ValueError):
    """Raised when a parsed case breaks a structural invariant."""


class CaseWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    load: float = 0.0
    is_reference: bool = False


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float
    limit: float | None = None
    in_service: bool = True

    @property
    def bounded(self):
        return self.limit is not None and math.isfinite(self.limit)


@dataclass(frozen=True)
class Generator:
    id: int
    at_bus: int
    p_min: float
    p_max: float
    cost: float
    cost_segments: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.message}"


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    base_mva: float = 100.0
    name: str = "case"

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))

    # index helpers -----------------------------------------------------

    @cached_property
    def bus_ids(self) -> np.ndarray:
        return np.array([b.id for b in self.buses], dtype=int)

    @cached_property
    def line_ids(self) -> np.ndarray:
        return np.array([ln.id for ln in self.lines], dtype=int)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def line_index(self) -> dict[int, int]:
        return {ln.id: k for k, ln in enumerate(self.lines)}

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_lines(self):
        return len(self.lines)

    @cached_property
    def reference_bus(self) -> int:
        refs = [b.id for b in self.buses if b.is_reference]
        if not refs:
            raise CaseValidationError("case has no reference bus")
        return refs[0]

    @cached_property
    def from_idx(self) -> np.ndarray:
        return np.array([self.bus_index[ln.from_bus] for ln in self.lines], dtype=int)

    @cached_property
    def to_idx(self) -> np.ndarray:
        return np.array([self.bus_index[ln.to_bus] for ln in self.lines], dtype=int)

    @cached_property
    def susceptances(self) -> np.ndarray:
        return np.array([ln.susceptance for ln in self.lines], dtype=float)

    @cached_property
    def limits(self) -> np.ndarray:
        """Line limits in MW, ``inf`` where unbounded."""
        return np.array(
            [ln.limit if ln.bounded else np.inf for ln in self.lines], dtype=float
        )

    @cached_property
    def in_service(self) -> np.ndarray:
        return np.array([ln.in_service for ln in self.lines], dtype=bool)

    @cached_property
    def loads(self) -> np.ndarray:
        return np.array([b.load for b in self.buses], dtype=float)

    @cached_property
    def gen_bus_idx(self) -> np.ndarray:
        return np.array([self.bus_index[g.at_bus] for g in self.generators], dtype=int)

    @cached_property
    def gen_costs(self) -> np.ndarray:
        return np.array([g.cost for g in self.generators], dtype=float)

    def line(self, line_id) -> Line:
        try:
            return self.lines[self.line_index[line_id]]
        except KeyError:
            raise KeyError(f"unknown line id {line_id}") from None

    def in_service_line_ids(self):
        return [ln.id for ln in self.lines if ln.in_service]

    def replace(self, **changes) -> GridCase:
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "buses": [dataclasses.asdict(b) for b in self.buses],
            "lines": [dataclasses.asdict(ln) for ln in self.lines],
            "generators": [
                {
                    **dataclasses.asdict(g),
                    "cost_segments": (
                        None
                        if g.cost_segments is None
                        else [list(s) for s in g.cost_segments]
                    ),
                }
                for g in self.generators
            ],
        }


# ---------------------------------------------------------------------------
# JSON


def parse_json(text: str) -> GridCase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(exc.msg, exc.lineno) from exc
    for key in ("buses", "lines", "generators"):
        if key not in doc:
            raise CaseParseError(f"missing section {key!r}")
    try:
        buses = [
            Bus(int(b["id"]), float(b.get("load", 0.0)), bool(b.get("is_reference", False)))
            for b in doc["buses"]
        ]
        lines = [
            Line(
                int(ln["id"]),
                int(ln["from_bus"]),
                int(ln["to_bus"]),
                float(ln["susceptance"]),
                None if ln.get("limit") is None else float(ln["limit"]),
                bool(ln.get("in_service", True)),
            )
            for ln in doc["lines"]
        ]
        gens = []
        for g in doc["generators"]:
            segs = g.get("cost_segments")
            gens.append(
                Generator(
                    int(g["id"]),
                    int(g["at_bus"]),
                    float(g.get("p_min", 0.0)),
                    float(g["p_max"]),
                    float(g.get("cost", 0.0)),
                    None if segs is None else tuple((float(w), float(c)) for w, c in segs),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseParseError(f"bad record: {exc}") from exc
    case = GridCase(
        tuple(buses),
        tuple(lines),
        tuple(gens),
        float(doc.get("base_mva", 100.0)),
        str(doc.get("name", "case")),
    )
    return _normalize(case)


def dumps_json(case: GridCase, indent=1) -> str:
    return json.dumps(case.to_dict(), indent=indent)


# ---------------------------------------------------------------------------
# MATPOWER

_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([^;\[\]]+);")
_MATRIX_START_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[")

# column positions in the MATPOWER v2 tables (0-based)
_BUS_I, _BUS_TYPE, _PD = 0, 1, 2
_F_BUS, _T_BUS, _BR_X, _RATE_A, _BR_STATUS = 0, 1, 3, 5, 10
_GEN_BUS, _GEN_STATUS, _PMAX, _PMIN = 0, 7, 8, 9
_REF_TYPE = 3


def _read_matrices(text):
    scalars = {}
    matrices = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i].split("%", 1)[0]
        m = _MATRIX_START_RE.search(raw)
        if m:
            name = m.group(1)
            rows = []
            body = raw[m.end():]
            lineno = i + 1
            while True:
                done = "]" in body
                chunk = body.split("]", 1)[0]
                for piece in chunk.split(";"):
                    toks = piece.replace(",", " ").split()
                    if not toks:
                        continue
                    try:
                        rows.append(([float(t) for t in toks], lineno))
                    except ValueError:
                        raise CaseParseError(
                            f"non-numeric entry in mpc.{name}: {piece.strip()!r}", lineno
                        ) from None
                if done:
                    break
                i += 1
                if i >= len(lines):
                    raise CaseParseError(f"unterminated matrix mpc.{name}", lineno)
                lineno = i + 1
                body = lines[i].split("%", 1)[0]
            if rows:
                width = len(rows[0][0])
                for vals, ln in rows:
                    if len(vals) != width:
                        raise CaseParseError(
                            f"mpc.{name} row has {len(vals)} columns, expected {width}", ln
                        )
            matrices[name] = rows
        else:
            s = _SCALAR_RE.search(raw)
            if s:
                scalars[s.group(1)] = (s.group(2).strip(), i + 1)
        i += 1
    return scalars, matrices


def _need_cols(name, rows, ncols):
    for vals, ln in rows:
        if len(vals) < ncols:
            raise CaseParseError(f"mpc.{name} needs at least {ncols} columns", ln)


def _linear_cost(row, p_max, gen_id):
    """Reduce one gencost row to ``(linear_coefficient, segments)``."""
    model = int(row[0])
    n = int(row[3])
    coeffs = row[4:4 + (2 * n if model == 1 else n)]
    if model == 2:
        if n == 0:
            return 0.0, None
        if n == 1:
            return 0.0, None
        if n == 2:
            return float(coeffs[0]), None
        # marginal cost of a polynomial sum(c_k p^k) evaluated at p_max / 2
        p = p_max / 2.0
        deg = n - 1
        marginal = sum(c * (deg - k) * p ** (deg - k - 1) for k, c in enumerate(coeffs[:-1]))
        if any(c != 0 for c in coeffs[:-2]):
            warnings.warn(
                f"generator {gen_id}: polynomial cost linearized at p_max/2 "
                f"(marginal {marginal:.6g})",
                CaseWarning,
                stacklevel=4,
            )
        return float(marginal), None
    if model == 1:
        pts = np.asarray(coeffs, dtype=float).reshape(-1, 2)
        widths = np.diff(pts[:, 0])
        prices = np.diff(pts[:, 1]) / np.where(widths > 0, widths, 1.0)
        segs = tuple((float(w), float(c)) for w, c in zip(widths, prices) if w > 0)
        return (float(segs[0][1]) if segs else 0.0), segs or None
    raise CaseParseError(f"unknown gencost model {model} for generator {gen_id}")


def parse_matpower(text: str, name: str = "case") -> GridCase:
    scalars, mats = _read_matrices(text)
    for section in ("bus", "branch", "gen"):
        if section not in mats:
            raise CaseParseError(f"missing mpc.{section} section")
    base = 100.0
    if "baseMVA" in scalars:
        val, ln = scalars["baseMVA"]
        try:
            base = float(val)
        except ValueError:
            raise CaseParseError(f"bad baseMVA {val!r}", ln) from None
    _need_cols("bus", mats["bus"], 3)
    _need_cols("branch", mats["branch"], 4)
    _need_cols("gen", mats["gen"], 10)

    buses = [
        Bus(int(r[_BUS_I]), float(r[_PD]), int(r[_BUS_TYPE]) == _REF_TYPE)
        for r, _ in mats["bus"]
    ]
    lines = []
    for k, (r, _) in enumerate(mats["branch"], start=1):
        x = r[_BR_X]
        rate = r[_RATE_A] if len(r) > _RATE_A else 0.0
        status = r[_BR_STATUS] if len(r) > _BR_STATUS else 1.0
        lines.append(
            Line(
                k,
                int(r[_F_BUS]),
                int(r[_T_BUS]),
                (1.0 / x) if x != 0 else math.inf,
                float(rate) if rate > 0 else None,
                status > 0,
            )
        )
    costs = mats.get("gencost", [])
    gens = []
    for k, (r, ln) in enumerate(mats["gen"], start=1):
        if r[_GEN_STATUS] <= 0:
            continue
        if k - 1 < len(costs):
            coef, segs = _linear_cost(costs[k - 1][0], r[_PMAX], k)
        else:
            coef, segs = 0.0, None
        gens.append(Generator(k, int(r[_GEN_BUS]), float(r[_PMIN]), float(r[_PMAX]), coef, segs))

    case = GridCase(tuple(buses), tuple(lines), tuple(gens), base, name)
    return _normalize(case)


# ---------------------------------------------------------------------------


def _normalize(case: GridCase) -> GridCase:
    """Force exactly one reference bus and reject dangling references."""
    ids = {b.id for b in case.buses}
    for ln in case.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in ids:
                raise CaseValidationError(f"line {ln.id} references absent bus {end}")
    for g in case.generators:
        if g.at_bus not in ids:
            raise CaseValidationError(f"generator {g.id} references absent bus {g.at_bus}")
    refs = [i for i, b in enumerate(case.buses) if b.is_reference]
    if len(refs) == 1:
        return case
    keep = refs[0] if refs else 0
    buses = tuple(
        dataclasses.replace(b, is_reference=(i == keep)) for i, b in enumerate(case.buses)
    )
    return case.replace(buses=buses)


def loads_case(text: str, name: str = "case") -> GridCase:
    """Parse case text, sniffing JSON vs MATPOWER."""
    if text.lstrip().startswith("{"):
        return parse_json(text)
    return parse_matpower(text, name=name)


def load_case(source) -> GridCase:
    """Load a case from a path (``.json`` or ``.m``) or from raw case text.

    The bundled IEEE 118-bus switching case is available as ``"ieee118"``.
    """
    if isinstance(source, str) and source == "ieee118":
        from gridcut.datasets import load_ieee118

        return load_ieee118()
    if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source and Path(source).suffix in (".m", ".json")
    ):
        path = Path(source)
        return loads_case(path.read_text(), name=path.stem)
    return loads_case(source)


# ---------------------------------------------------------------------------


def _components(n, edges):
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [-1] * n
    count = 0
    for s in range(n):
        if seen[s] >= 0:
            continue
        seen[s] = count
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if seen[v] < 0:
                    seen[v] = count
                    queue.append(v)
        count += 1
    return count, seen


def validate(case: GridCase) -> list[Diagnostic]:
    """Check every structural invariant and return diagnostics (never raises)."""
    out = []
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        out.append(Diagnostic("duplicate-bus", "bus ids are not unique"))
    idset = set(ids)
    if sum(b.is_reference for b in case.buses) != 1:
        out.append(Diagnostic("reference-count", "case must have exactly one reference bus"))
    for b in case.buses:
        if not math.isfinite(b.load):
            out.append(Diagnostic("nonfinite-load", f"bus {b.id} load is not finite"))
    line_ids = [ln.id for ln in case.lines]
    if len(set(line_ids)) != len(line_ids):
        out.append(Diagnostic("duplicate-line", "line ids are not unique"))
    for ln in case.lines:
        if ln.from_bus == ln.to_bus:
            out.append(Diagnostic("self-loop", f"line {ln.id} starts and ends at bus {ln.from_bus}"))
        if not (ln.susceptance > 0 and math.isfinite(ln.susceptance)):
            out.append(
                Diagnostic(
                    "nonpositive-susceptance",
                    f"line {ln.id} susceptance {ln.susceptance} must be finite and > 0",
                )
            )
        if ln.limit is not None and ln.limit < 0:
            out.append(Diagnostic("negative-limit", f"line {ln.id} limit is negative"))
        for end in (ln.from_bus, ln.to_bus):
            if end not in idset:
                out.append(Diagnostic("dangling-bus", f"line {ln.id} references absent bus {end}"))
    for g in case.generators:
        if g.at_bus not in idset:
            out.append(Diagnostic("dangling-bus", f"generator {g.id} references absent bus {g.at_bus}"))
        if g.p_min > g.p_max:
            out.append(Diagnostic("pmin-gt-pmax", f"generator {g.id} has p_min > p_max"))
        if g.cost_segments:
            prices = [c for _, c in g.cost_segments]
            if any(b < a for a, b in zip(prices, prices[1:])):
                out.append(Diagnostic("nonconvex-cost", f"generator {g.id} cost is not convex"))
    if sum(g.p_max for g in case.generators) < sum(b.load for b in case.buses):
        out.append(Diagnostic("insufficient-capacity", "total p_max is below total load"))
    if any(d.code == "dangling-bus" for d in out) or not case.buses:
        return out
    index = {b: i for i, b in enumerate(ids)}
    edges = [(index[ln.from_bus], index[ln.to_bus]) for ln in case.lines if ln.in_service]
    count, _ = _components(len(ids), edges)
    if count > 1:
        out.append(Diagnostic("disconnected", f"in-service network has {count} islands"))
    return out


def is_connected(case: GridCase) -> bool:
    edges = zip(case.from_idx[case.in_service], case.to_idx[case.in_service])
    count, _ = _components(case.n_buses, edges)
    return count == 1


def with_line_status(case: GridCase, line_id, in_service: bool) -> GridCase:
    """Copy of ``case`` with one line switched in or out."""
    k = case.line_index.get(line_id)
    if k is None:
        raise KeyError(f"unknown line id {line_id}")
    if case.lines[k].in_service == bool(in_service):
        return case
    lines = list(case.lines)
    lines[k] = dataclasses.replace(lines[k], in_service=bool(in_service))
    return case.replace(lines=tuple(lines))


def perturb_gencosts(case: GridCase, seed, spread: float) -> GridCase:
    """Scale each generator's cost by an independent U[1 - spread, 1 + spread] draw.

    Loads and everything else are left alone; for a fixed seed the result is
    deterministic.
    """
    if not 0.0 <= spread < 1.0:
        raise ValueError(f"spread must lie in [0, 1), got {spread}")
    rng = np.random.default_rng(seed)
    factors = rng.uniform(1.0 - spread, 1.0 + spread, size=len(case.generators))
    if spread == 0.0:
        return case
    gens = tuple(
        dataclasses.replace(
            g,
            cost=g.cost * f,
            cost_segments=(
                None
                if g.cost_segments is None
                else tuple((w, c * f) for w, c in g.cost_segments)
            ),
        )
        for g, f in zip(case.generators, factors)
    )
    return case.replace(generators=gens)
