"""Compact algebraic form of the dispatch problem: a cost vector over the
stacked variable x = [p, v] and inequality rows a_k'x + b_k'd + e_k <= 0.

Row order is canonical and stable across runs: generator upper bounds,
generator lower bounds, the balance pair (upper then lower), flow upper
bounds, flow lower bounds, and the nonnegativity rows of p and v. Constraint
indices reported by selection routines therefore mean the same thing in
every output.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .case_io import GridCase, PtdfMatrix

log = logging.getLogger(__name__)


class RowKind(Enum):
    GEN_UPPER = "GenUpper"
    GEN_LOWER = "GenLower"
    BALANCE_UPPER = "BalanceUpper"
    BALANCE_LOWER = "BalanceLower"
    FLOW_UPPER = "FlowUpper"
    FLOW_LOWER = "FlowLower"
    NONNEG_P = "NonNegP"
    NONNEG_V = "NonNegV"


@dataclass(frozen=True)
class CompactRow:
    a: np.ndarray             # over x = [p, v]
    b: np.ndarray             # over bus loads
    e: float                  # -inf marks a vacuous (unlimited) flow row
    kind: RowKind
    index: int                # generator / line / variable index

    @property
    def vacuous(self) -> bool:
        return math.isinf(self.e)

    @property
    def name(self) -> str:
        return f"{self.kind.value}[{self.index}]"


@dataclass(frozen=True)
class PenaltyConfig:
    """Uniform violation penalty; must strictly exceed every generator cost."""

    psi: float

    @staticmethod
    def default_for(case: GridCase, factor: float = 10.0) -> "PenaltyConfig":
        return PenaltyConfig(psi=factor * max(g.cost for g in case.generators))


@dataclass(frozen=True)
class CompactModel:
    c: np.ndarray             # length n_gen + n_line
    rows: tuple[CompactRow, ...]
    n_bus: int
    n_gen: int
    n_line: int
    gen_bus: np.ndarray       # generator -> bus position
    p_min: np.ndarray
    p_max: np.ndarray
    psi: float
    bus_ids: tuple[int, ...]

    @property
    def n_x(self) -> int:
        return self.n_gen + self.n_line

    @property
    def K(self) -> int:
        return len(self.rows)

    def active_rows(self) -> list[int]:
        """Indices of rows that materialize in assembled programs."""
        return [k for k, r in enumerate(self.rows) if not r.vacuous]


def build_compact(case: GridCase, F: PtdfMatrix,
                  penalty: PenaltyConfig | None = None) -> CompactModel:
    """Assemble the compact model; minimizing c'x over its rows at load d
    reproduces the dispatch problem exactly (balance encoded as a pair of
    opposing inequalities, both tight at any optimum)."""
    if penalty is None:
        penalty = PenaltyConfig.default_for(case)
    qmax = max(g.cost for g in case.generators)
    if penalty.psi <= qmax:
        raise ValueError(
            f"violation penalty {penalty.psi} must exceed the maximum "
            f"generator cost {qmax}")
    if F.slack_bus != case.slack_bus:
        raise ValueError("PTDF slack bus does not match the case slack bus")

    idx = case.bus_index()
    nb, ng, nl = case.n_bus, len(case.generators), len(case.branches)
    nx = ng + nl

    c = np.concatenate([
        np.array([g.cost for g in case.generators], dtype=float),
        np.full(nl, float(penalty.psi)),
    ])
    gen_bus = np.array([idx[g.bus] for g in case.generators], dtype=int)
    p_max = np.array([g.p_max for g in case.generators], dtype=float)
    p_min = np.array([g.p_min for g in case.generators], dtype=float)
    neg = p_min < 0
    if neg.any():
        log.warning("clamping %d negative generator lower bounds to 0",
                    int(neg.sum()))
        p_min = np.maximum(p_min, 0.0)

    # map generator dispatch onto buses for the flow rows
    G = np.zeros((nb, ng))
    G[gen_bus, np.arange(ng)] = 1.0

    rows: list[CompactRow] = []

    def a_vec() -> np.ndarray:
        return np.zeros(nx)

    for g in range(ng):                          # p_g <= p_max
        a = a_vec(); a[g] = 1.0
        rows.append(CompactRow(a=a, b=np.zeros(nb), e=-p_max[g],
                               kind=RowKind.GEN_UPPER, index=g))
    for g in range(ng):                          # p_min <= p_g
        a = a_vec(); a[g] = -1.0
        rows.append(CompactRow(a=a, b=np.zeros(nb), e=p_min[g],
                               kind=RowKind.GEN_LOWER, index=g))

    a = a_vec(); a[:ng] = 1.0                    # 1'(p - d) <= 0
    rows.append(CompactRow(a=a, b=-np.ones(nb), e=0.0,
                           kind=RowKind.BALANCE_UPPER, index=0))
    a = a_vec(); a[:ng] = -1.0                   # -1'(p - d) <= 0
    rows.append(CompactRow(a=a, b=np.ones(nb), e=0.0,
                           kind=RowKind.BALANCE_LOWER, index=0))

    cap = np.array([br.capacity_mw for br in case.branches], dtype=float)
    for li in range(nl):                         # F(Gp - d) - cap - v <= 0
        frow = F.entries[li]
        a = a_vec()
        a[:ng] = frow @ G
        a[ng + li] = -1.0
        rows.append(CompactRow(a=a, b=-frow.copy(), e=-cap[li],
                               kind=RowKind.FLOW_UPPER, index=li))
    for li in range(nl):                         # -F(Gp - d) - cap - v <= 0
        frow = F.entries[li]
        a = a_vec()
        a[:ng] = -(frow @ G)
        a[ng + li] = -1.0
        rows.append(CompactRow(a=a, b=frow.copy(), e=-cap[li],
                               kind=RowKind.FLOW_LOWER, index=li))

    for g in range(ng):                          # -p_g <= 0
        a = a_vec(); a[g] = -1.0
        rows.append(CompactRow(a=a, b=np.zeros(nb), e=0.0,
                               kind=RowKind.NONNEG_P, index=g))
    for li in range(nl):                         # -v_l <= 0
        a = a_vec(); a[ng + li] = -1.0
        rows.append(CompactRow(a=a, b=np.zeros(nb), e=0.0,
                               kind=RowKind.NONNEG_V, index=li))

    assert len(rows) == 2 * ng + 2 + 2 * nl + ng + nl
    return CompactModel(c=c, rows=tuple(rows), n_bus=nb, n_gen=ng, n_line=nl,
                        gen_bus=gen_bus, p_min=p_min, p_max=p_max,
                        psi=float(penalty.psi),
                        bus_ids=tuple(b.id for b in case.buses))


def attackable_rows(model: CompactModel) -> list[int]:
    """Indices of rows whose load coefficients are not identically zero
    (balance and flow rows). Vacuous flow rows are included; relevance
    filtering is the caller's job."""
    return [k for k, r in enumerate(model.rows) if np.any(r.b != 0.0)]
