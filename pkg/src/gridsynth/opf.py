"""Least-cost dispatch on the compact model for a fixed load vector."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compact import CompactModel
from .solver import (
    INF, LE, LinearProgram, ProgramBuilder, Solution, Status, solve_lp,
)


@dataclass
class OpfResult:
    cost: float
    p: np.ndarray
    v: np.ndarray
    duals: np.ndarray         # one entry per model row; 0 on vacuous rows
    feasible: bool
    certificate: str | None = None
    solution: Solution | None = None


def opf_program(model: CompactModel, d: np.ndarray
                ) -> tuple[LinearProgram, list[int]]:
    """Assemble the dispatch LP for loads ``d``.

    Variables are declared free; every bound lives in an explicit model row
    so the reported duals close the stationarity identity c + sum(dual_k *
    a_k) = 0 on their own. Returns (lp, active_row_indices).
    """
    if d.shape != (model.n_bus,):
        raise ValueError(f"load vector must have length {model.n_bus}")
    b = ProgramBuilder(sense="min")
    x = b.add_vars("x", model.n_x, lo=-INF, hi=INF)
    for j in range(model.n_x):
        b.set_objective(int(x[j]), float(model.c[j]))
    active = model.active_rows()
    for k in active:
        row = model.rows[k]
        nz = np.nonzero(row.a)[0]
        rhs = -(float(row.b @ d) + row.e)
        b.add_row([int(x[j]) for j in nz], [float(row.a[j]) for j in nz],
                  LE, rhs, name=row.name)
    return b.build(), active


def solve_opf(model: CompactModel, d: np.ndarray) -> OpfResult:
    """Dispatch cost, generation, violations and row duals at load ``d``.

    Flow limits are soft (violation variables carry the penalty), so the
    only hard feasibility requirement is that total load is coverable:
    sum(p_min) <= 1'd <= sum(p_max).
    """
    d = np.asarray(d, dtype=float)
    total = float(d.sum())
    p_cap = float(model.p_max.sum())
    p_floor = float(np.maximum(model.p_min, 0.0).sum())
    empty = np.zeros(0)
    if total > p_cap + 1e-9:
        return OpfResult(cost=math.nan, p=empty, v=empty,
                         duals=np.zeros(model.K), feasible=False,
                         certificate=f"total load {total:.6g} MW exceeds "
                                     f"dispatchable capacity {p_cap:.6g} MW")
    if total < p_floor - 1e-9:
        return OpfResult(cost=math.nan, p=empty, v=empty,
                         duals=np.zeros(model.K), feasible=False,
                         certificate=f"total load {total:.6g} MW is below the "
                                     f"must-run floor {p_floor:.6g} MW")

    lp, active = opf_program(model, d)
    sol = solve_lp(lp)
    if sol.status != Status.OPTIMAL:
        return OpfResult(cost=math.nan, p=empty, v=empty,
                         duals=np.zeros(model.K), feasible=False,
                         certificate=f"dispatch LP ended {sol.status}",
                         solution=sol)
    duals = np.zeros(model.K)
    for pos, k in enumerate(active):
        duals[k] = sol.duals[pos]
    p = sol.primal[:model.n_gen].copy()
    v = sol.primal[model.n_gen:model.n_x].copy()
    return OpfResult(cost=float(sol.objective), p=p, v=v, duals=duals,
                     feasible=True, solution=sol)
