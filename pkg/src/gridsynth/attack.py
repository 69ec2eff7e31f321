"""Load-redistribution attacks on the compact dispatch model.

An attack is a zero-sum perturbation of the loads inside a per-bus box. The
exact worst case (``bo_attack``) embeds the dispatch problem through its
optimality conditions and branches on the complementarities; the
conservative variant (``ro_attack``) applies a per-constraint worst case and
solves a single LP via duality; ``ro_attack_reduced`` robustifies only a
chosen subset of constraints. ``oracle_attack`` enumerates the vertices of
the attack polytope as an independent ground truth for small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .compact import CompactModel, attackable_rows
from .opf import solve_opf
from .solver import (
    EQ, GE, INF, LE,
    ComplementarityPair, MixedProgram, ProgramBuilder, Solution, Status,
    solve_complementarity, solve_lp,
)

ZERO_SUM_TOL = 1e-7
ORACLE_MAX_COORDS = 8


@dataclass(frozen=True)
class AttackSet:
    """Admissible perturbations: delta_lo <= delta <= delta_hi per bus plus
    a zero total (total system loading unchanged)."""

    delta_lo: np.ndarray
    delta_hi: np.ndarray
    eta: float | None = None

    def __post_init__(self):
        if np.any(self.delta_lo > 0) or np.any(self.delta_hi < 0):
            raise ValueError("attack bounds must satisfy lo <= 0 <= hi")

    @property
    def coords(self) -> np.ndarray:
        """Bus positions with a nonzero attack range."""
        return np.nonzero((self.delta_hi - self.delta_lo) > 0)[0]

    def contains(self, delta: np.ndarray, tol: float = ZERO_SUM_TOL) -> bool:
        return (abs(float(delta.sum())) <= tol
                and np.all(delta >= self.delta_lo - tol)
                and np.all(delta <= self.delta_hi + tol))


@dataclass
class AttackResult:
    cost: float
    delta: np.ndarray                       # worst single vector (BO/oracle)
    node_count: int = 0
    per_row_delta: dict[int, np.ndarray] | None = None  # RO worst cases


def make_attack_set(d: np.ndarray, eta: float) -> AttackSet:
    """Symmetric bounds of +-eta times each load; zero loads stay pinned."""
    d = np.asarray(d, dtype=float)
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if np.any(d < 0):
        raise ValueError("loads must be nonnegative to derive attack bounds")
    return AttackSet(delta_lo=-eta * d, delta_hi=eta * d, eta=eta)


def _row_worst_case(row_b: np.ndarray, delta: AttackSet) -> float:
    """max of b'delta over the attack set (tiny LP)."""
    ix = delta.coords
    if ix.size == 0 or not np.any(row_b[ix] != 0.0):
        return 0.0
    b = ProgramBuilder(sense="max")
    dv = [b.add_var(f"d[{i}]", lo=float(delta.delta_lo[i]),
                    hi=float(delta.delta_hi[i]), obj=float(row_b[i]))
          for i in ix]
    b.add_row(dv, [1.0] * len(dv), EQ, 0.0, name="zero_sum")
    sol = solve_lp(b.build())
    if sol.status != Status.OPTIMAL:
        raise RuntimeError(f"worst-case row LP ended {sol.status}")
    return float(sol.objective)


def _row_worst_delta(row_b: np.ndarray, delta: AttackSet) -> np.ndarray:
    ix = delta.coords
    out = np.zeros_like(delta.delta_lo)
    if ix.size == 0:
        return out
    b = ProgramBuilder(sense="max")
    dv = [b.add_var(f"d[{i}]", lo=float(delta.delta_lo[i]),
                    hi=float(delta.delta_hi[i]), obj=float(row_b[i]))
          for i in ix]
    b.add_row(dv, [1.0] * len(dv), EQ, 0.0, name="zero_sum")
    sol = solve_lp(b.build())
    if sol.status != Status.OPTIMAL:
        raise RuntimeError(f"worst-case row LP ended {sol.status}")
    out[ix] = sol.primal
    return out


# ---------------------------------------------------------------------------
# exact bilevel attack
# ---------------------------------------------------------------------------

def bo_attack(model: CompactModel, d: np.ndarray, delta: AttackSet,
              node_limit: int = 200_000) -> AttackResult:
    """Globally worst attack: maximize the re-dispatched cost over the
    attack set, with the dispatch problem replaced by its optimality
    conditions and complementarities resolved by branching.

    The conservative single-LP value is computed first and installed as an
    upper cut on the objective, which keeps the branch-and-bound tree
    shallow (the relaxation would otherwise reward unbounded violations).
    """
    d = np.asarray(d, dtype=float)
    base = solve_opf(model, d)
    if not base.feasible:
        raise ValueError(f"nominal dispatch infeasible: {base.certificate}")
    ro = ro_attack(model, d, delta)
    cap = ro.cost + 1e-5 * max(1.0, abs(ro.cost))

    ix = delta.coords
    active = model.active_rows()
    nb = model.n_bus

    b = ProgramBuilder(sense="max")
    x = b.add_vars("x", model.n_x, lo=-INF, hi=INF)
    for j in range(model.n_x):
        b.set_objective(int(x[j]), float(model.c[j]))
    dv = {int(i): b.add_var(f"delta[{i}]", lo=float(delta.delta_lo[i]),
                            hi=float(delta.delta_hi[i])) for i in ix}
    nus = b.add_vars("nu", len(active), lo=0.0)
    if dv:
        b.add_row(list(dv.values()), [1.0] * len(dv), EQ, 0.0, name="zero_sum")

    pairs: list[ComplementarityPair] = []
    for pos, k in enumerate(active):
        row = model.rows[k]
        idxs = [int(x[j]) for j in np.nonzero(row.a)[0]]
        coefs = [float(row.a[j]) for j in np.nonzero(row.a)[0]]
        rhs = -(float(row.b @ d) + row.e)
        for i in ix:
            if row.b[i] != 0.0:
                idxs.append(dv[int(i)])
                coefs.append(float(row.b[i]))
        r = b.add_row(idxs, coefs, LE, rhs, name=f"primal_{row.name}")
        pairs.append(ComplementarityPair(int(nus[pos]), r))

    # stationarity of the embedded dispatch problem
    for j in range(model.n_x):
        idxs, coefs = [], []
        for pos, k in enumerate(active):
            aj = model.rows[k].a[j]
            if aj != 0.0:
                idxs.append(int(nus[pos]))
                coefs.append(float(aj))
        b.add_row(idxs, coefs, EQ, -float(model.c[j]), name=f"stat[{j}]")

    # valid upper cut from the conservative approximation
    b.add_row([int(x[j]) for j in range(model.n_x)],
              [float(model.c[j]) for j in range(model.n_x)],
              LE, cap, name="conservative_cap")

    mp = MixedProgram(lp=b.build(), pairs=pairs)

    # seed: the undisturbed dispatch with its own multipliers
    warm = np.zeros(mp.lp.n_vars)
    warm[:model.n_x] = np.concatenate([base.p, base.v])
    for pos, k in enumerate(active):
        warm[int(nus[pos])] = base.duals[k]
    sol = solve_complementarity(mp, node_limit=node_limit, warm_point=warm)
    if sol.status not in (Status.OPTIMAL, Status.ITER_LIMIT) or sol.primal is None:
        raise RuntimeError(f"attack search ended {sol.status}")
    dvec = np.zeros(nb)
    for i, var in dv.items():
        dvec[i] = sol.primal[var]
    return AttackResult(cost=float(sol.objective), delta=dvec,
                        node_count=sol.node_count)


# ---------------------------------------------------------------------------
# conservative (per-constraint worst case) attacks
# ---------------------------------------------------------------------------

def _robust_lp(model: CompactModel, d: np.ndarray, delta: AttackSet,
               robust: set[int]):
    """LP with the chosen rows hardened against their own worst-case
    perturbation via duals of the attack set."""
    ix = delta.coords
    b = ProgramBuilder(sense="min")
    x = b.add_vars("x", model.n_x, lo=-INF, hi=INF)
    for j in range(model.n_x):
        b.set_objective(int(x[j]), float(model.c[j]))
    row_positions: dict[int, int] = {}
    for k in model.active_rows():
        row = model.rows[k]
        nz = np.nonzero(row.a)[0]
        idxs = [int(x[j]) for j in nz]
        coefs = [float(row.a[j]) for j in nz]
        rhs = -(float(row.b @ d) + row.e)
        hardened = (k in robust and ix.size > 0
                    and bool(np.any(row.b[ix] != 0.0)))
        if hardened:
            mu_up = b.add_vars(f"mu_up[{k}]", len(ix), lo=0.0)
            mu_lo = b.add_vars(f"mu_lo[{k}]", len(ix), lo=0.0)
            lam = b.add_var(f"lam[{k}]", lo=-INF, hi=INF)
            for t, i in enumerate(ix):
                idxs.append(int(mu_up[t]))
                coefs.append(float(delta.delta_hi[i]))
                idxs.append(int(mu_lo[t]))
                coefs.append(float(-delta.delta_lo[i]))
            # dual feasibility: b_i - mu_up_i + mu_lo_i - lam = 0 per coord
            for t, i in enumerate(ix):
                b.add_row([int(mu_up[t]), int(mu_lo[t]), lam],
                          [-1.0, 1.0, -1.0], EQ, -float(row.b[i]),
                          name=f"dualfeas[{k}][{i}]")
        row_positions[k] = b.add_row(idxs, coefs, LE, rhs, name=row.name)
    return b, x, row_positions


def ro_attack(model: CompactModel, d: np.ndarray, delta: AttackSet) -> AttackResult:
    """Conservative attack cost: every load-coupled row is hardened
    against its own worst-case perturbation (single LP, upper-bounds the
    exact attack)."""
    rows = set(attackable_rows(model))
    return ro_attack_reduced(model, d, delta, rows)


def ro_attack_reduced(model: CompactModel, d: np.ndarray, delta: AttackSet,
                      rows: set[int] | list[int]) -> AttackResult:
    """Harden only ``rows`` (must be attackable); the rest stay at the
    unperturbed loads. An empty set reproduces the plain dispatch cost; the
    full attackable set reproduces ro_attack."""
    d = np.asarray(d, dtype=float)
    rows = set(int(r) for r in rows)
    allowed = set(attackable_rows(model))
    bad = rows - allowed
    if bad:
        raise ValueError(f"rows {sorted(bad)} are not attackable")
    b, x, row_pos = _robust_lp(model, d, delta, rows)
    sol = solve_lp(b.build())
    if sol.status != Status.OPTIMAL:
        raise RuntimeError(f"conservative attack LP ended {sol.status}")
    per_row = {}
    for k in sorted(rows):
        row = model.rows[k]
        if not row.vacuous:
            per_row[k] = _row_worst_delta(row.b, delta)
    return AttackResult(cost=float(sol.objective), delta=np.zeros(model.n_bus),
                        node_count=0, per_row_delta=per_row or None)


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def attack_vertices(delta: AttackSet) -> list[np.ndarray]:
    """All vertices of the attack polytope: every coordinate but one at a
    bound, the last balancing the sum, filtered for box feasibility.
    Duplicates are removed after rounding."""
    ix = delta.coords
    n = len(delta.delta_lo)
    if ix.size == 0:
        return [np.zeros(n)]
    if ix.size > ORACLE_MAX_COORDS:
        raise ValueError(
            f"{ix.size} attackable coordinates exceed the enumeration cap "
            f"of {ORACLE_MAX_COORDS}")
    verts: dict[tuple, np.ndarray] = {}
    zero = np.zeros(n)
    verts[tuple(zero[ix].round(9))] = zero
    for bal_pos in range(ix.size):
        others = [t for t in range(ix.size) if t != bal_pos]
        for pattern in itertools.product((0, 1), repeat=len(others)):
            v = np.zeros(n)
            for t, side in zip(others, pattern):
                i = ix[t]
                v[i] = delta.delta_hi[i] if side else delta.delta_lo[i]
            i_bal = ix[bal_pos]
            v[i_bal] = -v[ix].sum() + v[i_bal]
            if not (delta.delta_lo[i_bal] - 1e-12 <= v[i_bal]
                    <= delta.delta_hi[i_bal] + 1e-12):
                continue
            verts[tuple(v[ix].round(9))] = v
    return list(verts.values())


def oracle_attack(model: CompactModel, d: np.ndarray,
                  delta: AttackSet) -> AttackResult:
    """Exact worst case by enumerating attack-polytope vertices and solving
    one dispatch per vertex. The inner optimum is convex in the
    perturbation, so the maximum over the polytope is attained at a vertex."""
    d = np.asarray(d, dtype=float)
    best_cost = -math.inf
    best_delta = None
    verts = attack_vertices(delta)
    for v in verts:
        res = solve_opf(model, d + v)
        if not res.feasible:
            continue
        if res.cost > best_cost + 1e-12:
            best_cost = res.cost
            best_delta = v
    if best_delta is None:
        raise RuntimeError("no attack vertex admits a feasible dispatch")
    return AttackResult(cost=best_cost, delta=best_delta,
                        node_count=len(verts))


# ---------------------------------------------------------------------------
# damage metric
# ---------------------------------------------------------------------------

def damage_percent(model: CompactModel, d_release: np.ndarray,
                   delta: AttackSet) -> float:
    """Relative cost increase of the worst attack, in percent of the
    unattacked dispatch cost on the released loads."""
    d_release = np.asarray(d_release, dtype=float)
    base = solve_opf(model, d_release)
    if not base.feasible:
        raise ValueError(f"released loads are not dispatchable: {base.certificate}")
    if abs(base.cost) < 1e-12:
        raise ValueError("dispatch cost is zero; damage ratio undefined")
    att = bo_attack(model, d_release, delta)
    return (att.cost - base.cost) / base.cost * 100.0
