"""Grid case ingestion: a MATPOWER-style text subset, validation, and power
transfer distribution factors.

Supported sections: ``mpc.baseMVA``, ``mpc.bus``, ``mpc.branch``, ``mpc.gen``
and ``mpc.gencost`` (linear polynomial costs only). Loads, limits and
dispatch ranges are kept in MW on the system base; branch reactance stays in
per unit. A branch rating of 0 follows the MATPOWER convention and means
"unlimited" (stored as +inf).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np


class CaseSyntaxError(ValueError):
    """Malformed case text; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CaseSemanticError(ValueError):
    """Structurally valid text describing an unusable grid."""


@dataclass(frozen=True)
class Bus:
    id: int
    load_mw: float
    is_reference: bool = False


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    reactance: float          # per unit, > 0
    capacity_mw: float        # +inf when unlimited


@dataclass(frozen=True)
class Generator:
    bus: int
    cost: float               # $/MWh, linear coefficient
    p_min: float              # MW
    p_max: float              # MW


@dataclass(frozen=True)
class GridCase:
    name: str
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    slack_bus: int

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    def load_vector(self) -> np.ndarray:
        return np.array([b.load_mw for b in self.buses])

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "slack_bus": self.slack_bus,
            "buses": [{"id": b.id, "load_mw": b.load_mw,
                       "is_reference": b.is_reference} for b in self.buses],
            "branches": [{"from_bus": br.from_bus, "to_bus": br.to_bus,
                          "reactance": br.reactance,
                          "capacity_mw": (None if math.isinf(br.capacity_mw)
                                          else br.capacity_mw)}
                         for br in self.branches],
            "generators": [{"bus": g.bus, "cost": g.cost, "p_min": g.p_min,
                            "p_max": g.p_max} for g in self.generators],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


@dataclass(frozen=True)
class PtdfMatrix:
    """Linear map from balanced bus injections to branch flows; the slack
    column is identically zero."""

    entries: np.ndarray       # (n_branch, n_bus)
    slack_bus: int


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SECTION_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[", re.DOTALL)
_BASE_RE = re.compile(r"mpc\.baseMVA\s*=\s*([0-9eE+.\-]+)\s*;")
_NAME_RE = re.compile(r"function\s+mpc\s*=\s*(\w+)")


def _extract_sections(text: str) -> dict[str, list[tuple[int, list[str]]]]:
    """Return section name -> list of (line_number, fields) rows."""
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        stripped = re.sub(r"%.*$", "", lines[i])
        m = _SECTION_RE.search(stripped)
        if not m:
            i += 1
            continue
        name = m.group(1)
        rows: list[tuple[int, list[str]]] = []
        rest = stripped[m.end():]
        j = i
        closed = False
        while j < len(lines):
            content = rest if j == i else re.sub(r"%.*$", "", lines[j])
            if "]" in content:
                content = content[:content.index("]")]
                closed = True
            for piece in content.split(";"):
                fields = piece.split()
                if fields:
                    rows.append((j + 1, fields))
            if closed:
                break
            j += 1
        if not closed:
            raise CaseSyntaxError(f"section mpc.{name} never closed", i + 1)
        sections[name] = rows
        i = j + 1
    return sections


def _num(fields: list[str], col: int, line: int, what: str) -> float:
    try:
        return float(fields[col])
    except (IndexError, ValueError):
        raise CaseSyntaxError(f"cannot read {what} (column {col + 1})", line)


def parse_case(text: str) -> GridCase:
    """Parse case text into a validated GridCase.

    Raises CaseSyntaxError (with a line number) for malformed text and
    CaseSemanticError for duplicate buses, dangling branch endpoints,
    nonpositive reactance, disconnected networks, missing generators, or
    quadratic cost data.
    """
    name_m = _NAME_RE.search(text)
    name = name_m.group(1) if name_m else "case"
    base_m = _BASE_RE.search(text)
    base_mva = float(base_m.group(1)) if base_m else 100.0
    if base_mva <= 0:
        raise CaseSemanticError("base MVA must be positive")

    sections = _extract_sections(text)
    for required in ("bus", "gen", "branch"):
        if required not in sections:
            raise CaseSyntaxError(f"missing mpc.{required} table", 1)

    buses: list[Bus] = []
    seen: set[int] = set()
    for line, f in sections["bus"]:
        bid = int(_num(f, 0, line, "bus id"))
        btype = int(_num(f, 1, line, "bus type"))
        load = _num(f, 2, line, "bus load")
        if bid in seen:
            raise CaseSemanticError(f"duplicate bus id {bid}")
        if not math.isfinite(load):
            raise CaseSemanticError(f"non-finite load at bus {bid}")
        seen.add(bid)
        buses.append(Bus(id=bid, load_mw=load, is_reference=(btype == 3)))

    branches: list[Branch] = []
    for line, f in sections["branch"]:
        fb = int(_num(f, 0, line, "from bus"))
        tb = int(_num(f, 1, line, "to bus"))
        x = _num(f, 3, line, "reactance")
        rate = _num(f, 5, line, "rating") if len(f) > 5 else 0.0
        if fb == tb:
            raise CaseSemanticError(f"branch {fb}-{tb} connects a bus to itself")
        for end in (fb, tb):
            if end not in seen:
                raise CaseSemanticError(
                    f"branch {fb}-{tb} references missing bus {end}")
        if x <= 0:
            raise CaseSemanticError(
                f"branch {fb}-{tb} has nonpositive reactance {x}")
        branches.append(Branch(from_bus=fb, to_bus=tb, reactance=x,
                               capacity_mw=rate if rate > 0 else math.inf))

    gens: list[Generator] = []
    gen_rows = sections["gen"]
    for line, f in gen_rows:
        gb = int(_num(f, 0, line, "generator bus"))
        if gb not in seen:
            raise CaseSemanticError(f"generator references missing bus {gb}")
        pmax = _num(f, 8, line, "Pmax")
        pmin = _num(f, 9, line, "Pmin")
        gens.append(Generator(bus=gb, cost=0.0, p_min=pmin, p_max=pmax))
    if not gens:
        raise CaseSemanticError("case has no generators")

    cost_rows = sections.get("gencost", [])
    if cost_rows and len(cost_rows) != len(gens):
        raise CaseSemanticError(
            f"gencost has {len(cost_rows)} rows for {len(gens)} generators")
    for gi, (line, f) in enumerate(cost_rows):
        model = int(_num(f, 0, line, "cost model"))
        ncost = int(_num(f, 3, line, "cost term count"))
        if model != 2:
            raise CaseSemanticError(
                f"generator {gi + 1}: only polynomial cost model 2 is "
                f"supported (got model {model})")
        coeffs = [(_num(f, 4 + k, line, "cost coefficient"))
                  for k in range(ncost)]
        # polynomial is ordered highest degree first; anything beyond the
        # linear term must vanish
        higher = coeffs[:-2] if ncost >= 2 else []
        if any(c != 0.0 for c in higher):
            raise CaseSemanticError(
                f"generator {gi + 1}: quadratic or higher cost terms are not "
                f"supported; obtain a linear-cost case")
        linear = coeffs[-2] if ncost >= 2 else 0.0
        gens[gi] = Generator(bus=gens[gi].bus, cost=linear,
                             p_min=gens[gi].p_min, p_max=gens[gi].p_max)

    refs = [b.id for b in buses if b.is_reference]
    if refs:
        slack = refs[0]
    else:
        slack = min(g.bus for g in gens)

    case = GridCase(name=name, base_mva=base_mva, buses=tuple(buses),
                    branches=tuple(branches), generators=tuple(gens),
                    slack_bus=slack)
    if not _connected(case):
        raise CaseSemanticError("network is disconnected")
    return case


def parse_case_file(path) -> GridCase:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_case(fh.read())


def _connected(case: GridCase) -> bool:
    idx = case.bus_index()
    adj: dict[int, set[int]] = {i: set() for i in range(case.n_bus)}
    for br in case.branches:
        a, b = idx[br.from_bus], idx[br.to_bus]
        adj[a].add(b)
        adj[b].add(a)
    if case.n_bus == 0:
        return False
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == case.n_bus


# ---------------------------------------------------------------------------
# rendering (round-trip support for the documented subset)
# ---------------------------------------------------------------------------

def render_case(case: GridCase) -> str:
    """Serialize a GridCase back to the supported MATPOWER subset; the
    result re-parses to an identical GridCase."""
    out = [f"function mpc = {case.name}", "mpc.version = '2';",
           f"mpc.baseMVA = {case.base_mva:.17g};", ""]
    out.append("%% bus data: bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin")
    out.append("mpc.bus = [")
    for b in case.buses:
        btype = 3 if b.is_reference else 1
        out.append(f"\t{b.id}\t{btype}\t{b.load_mw:.17g}\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;")
    out.append("];")
    out.append("")
    out.append("%% generator data: bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin")
    out.append("mpc.gen = [")
    for g in case.generators:
        out.append(f"\t{g.bus}\t0\t0\t0\t0\t1\t{case.base_mva:.17g}\t1\t"
                   f"{g.p_max:.17g}\t{g.p_min:.17g};")
    out.append("];")
    out.append("")
    out.append("%% branch data: fbus tbus r x b rateA rateB rateC ratio angle status")
    out.append("mpc.branch = [")
    for br in case.branches:
        rate = 0.0 if math.isinf(br.capacity_mw) else br.capacity_mw
        out.append(f"\t{br.from_bus}\t{br.to_bus}\t0\t{br.reactance:.17g}\t0\t"
                   f"{rate:.17g}\t0\t0\t0\t0\t1;")
    out.append("];")
    out.append("")
    out.append("%% generator cost data: model startup shutdown n c1 c0")
    out.append("mpc.gencost = [")
    for g in case.generators:
        out.append(f"\t2\t0\t0\t2\t{g.cost:.17g}\t0;")
    out.append("];")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# validation findings
# ---------------------------------------------------------------------------

def validate_case(case: GridCase) -> list[str]:
    """Return one finding per violated invariant (empty means valid)."""
    findings: list[str] = []
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        findings.append("duplicate bus ids")
    idset = set(ids)
    for b in case.buses:
        if not math.isfinite(b.load_mw):
            findings.append(f"bus {b.id}: non-finite load")
    for br in case.branches:
        if br.from_bus == br.to_bus:
            findings.append(f"branch {br.from_bus}-{br.to_bus}: self loop")
        for end in (br.from_bus, br.to_bus):
            if end not in idset:
                findings.append(
                    f"branch {br.from_bus}-{br.to_bus}: missing endpoint {end}")
        if br.reactance <= 0:
            findings.append(
                f"branch {br.from_bus}-{br.to_bus}: nonpositive reactance")
        if br.capacity_mw < 0:
            findings.append(
                f"branch {br.from_bus}-{br.to_bus}: negative capacity")
    if not case.generators:
        findings.append("no generators")
    for gi, g in enumerate(case.generators):
        if g.bus not in idset:
            findings.append(f"generator {gi + 1}: missing bus {g.bus}")
        if g.p_min > g.p_max:
            findings.append(
                f"generator {gi + 1} at bus {g.bus}: p_min {g.p_min} exceeds "
                f"p_max {g.p_max}")
        if g.p_min < 0:
            findings.append(
                f"generator {gi + 1} at bus {g.bus}: negative p_min "
                f"{g.p_min} (clamped to 0 when building the dispatch model)")
        if g.cost < 0:
            findings.append(f"generator {gi + 1} at bus {g.bus}: negative cost")
    if case.slack_bus not in idset:
        findings.append(f"slack bus {case.slack_bus} does not exist")
    if case.n_bus and not _connected(case):
        findings.append("network is disconnected")
    return findings


# ---------------------------------------------------------------------------
# power transfer distribution factors
# ---------------------------------------------------------------------------

def compute_ptdf(case: GridCase) -> PtdfMatrix:
    """Dense PTDF via the reduced nodal susceptance matrix.

    Assembles B_bus from branch incidence and 1/x, deletes the slack
    row/column, solves against the branch susceptance-times-incidence
    matrix, and re-inserts a zero column at the slack bus.
    """
    idx = case.bus_index()
    n = case.n_bus
    nl = len(case.branches)
    s = idx[case.slack_bus]

    B = np.zeros((n, n))
    Bf = np.zeros((nl, n))
    for li, br in enumerate(case.branches):
        i, j = idx[br.from_bus], idx[br.to_bus]
        y = 1.0 / br.reactance
        B[i, i] += y
        B[j, j] += y
        B[i, j] -= y
        B[j, i] -= y
        Bf[li, i] = Bf[li, i] + y
        Bf[li, j] = Bf[li, j] - y

    keep = [k for k in range(n) if k != s]
    Bred = B[np.ix_(keep, keep)]
    try:
        sol = np.linalg.solve(Bred.T, Bf[:, keep].T).T
    except np.linalg.LinAlgError:
        raise CaseSemanticError(
            "reduced susceptance matrix is singular (disconnected network)")
    cond = np.linalg.cond(Bred)
    if not np.isfinite(cond) or cond > 1e12:
        raise CaseSemanticError(
            "reduced susceptance matrix is numerically singular "
            "(disconnected network)")
    F = np.zeros((nl, n))
    F[:, keep] = sol
    return PtdfMatrix(entries=F, slack_bus=case.slack_bus)


# ---------------------------------------------------------------------------
# bundled testbeds
# ---------------------------------------------------------------------------

BUILTIN_CASES = ("pjm5", "ieee14", "rts24", "ieee118")


def builtin_case_text(name: str) -> str:
    if name not in BUILTIN_CASES:
        raise KeyError(f"unknown builtin case {name!r}; have {BUILTIN_CASES}")
    ref = resources.files("gridsynth").joinpath(f"cases/{name}.m")
    return ref.read_text(encoding="utf-8")


def load_case(name_or_path: str) -> GridCase:
    """Load a bundled testbed by short name, or parse a file path."""
    if name_or_path in BUILTIN_CASES:
        return parse_case(builtin_case_text(name_or_path))
    return parse_case_file(name_or_path)
