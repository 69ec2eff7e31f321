"""LP kernel tests: simplex basics, anti-cycling, duality, branch-and-bound
soundness, determinism, audit, and export."""

import math

import numpy as np
import pytest

from gridsynth.solver import (
    EQ, GE, INF, LE,
    ComplementarityPair, LinearProgram, MixedProgram, ProgramBuilder,
    Status, audit_solution, export_lp_text, solve_complementarity, solve_lp,
)


def lp_from(c, A, rhs, rel, lo=None, hi=None, sense="min"):
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(len(rhs), len(c))
    n = len(c)
    return LinearProgram(
        c=c, A=A, rhs=np.asarray(rhs, dtype=float), rel=list(rel),
        lo=np.zeros(n) if lo is None else np.asarray(lo, dtype=float),
        hi=np.full(n, INF) if hi is None else np.asarray(hi, dtype=float),
        sense=sense)


# ---------------------------------------------------------------------------
# basics
# ---------------------------------------------------------------------------

def test_min_x_above_three():
    # min x s.t. x >= 3: optimum 3, multiplier of the binding row is 1
    lp = lp_from([1.0], [[1.0]], [3.0], [GE])
    sol = solve_lp(lp)
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert sol.duals[0] == pytest.approx(1.0, abs=1e-9)


def test_simple_max():
    # max x + y s.t. x + y <= 4, x <= 3
    lp = lp_from([1.0, 1.0], [[1, 1], [1, 0]], [4, 3], [LE, LE], sense="max")
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(4.0)
    assert sol.duals[0] == pytest.approx(1.0)
    assert sol.duals[1] == pytest.approx(0.0)


def test_equality_and_free_vars():
    # min |x| style: x free, x = -2 enforced by equality
    lp = lp_from([1.0], [[1.0]], [-2.0], [EQ], lo=[-INF])
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(-2.0)
    assert sol.primal[0] == pytest.approx(-2.0)


def test_two_sided_bounds():
    # min -x with x in [0, 2]
    lp = lp_from([-1.0], np.zeros((0, 1)), [], [], hi=[2.0])
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(-2.0)
    assert sol.primal[0] == pytest.approx(2.0)
    assert sol.bound_duals[0] == pytest.approx(-1.0)  # at upper bound


def test_infeasible_with_certificate():
    lp = lp_from([1.0], [[1.0], [1.0]], [3.0, 1.0], [GE, LE])
    sol = solve_lp(lp)
    assert sol.status == Status.INFEASIBLE
    assert sol.infeasibility_certificate is not None


def test_unbounded():
    lp = lp_from([-1.0], np.zeros((0, 1)), [], [])
    sol = solve_lp(lp)
    assert sol.status == Status.UNBOUNDED


def test_iter_limit():
    lp = lp_from([-1.0, -1.0], [[1, 2], [3, 1]], [4, 6], [LE, LE])
    sol = solve_lp(lp, iter_limit=1)
    assert sol.status == Status.ITER_LIMIT


def test_fixed_variable_substitution():
    lp = lp_from([1.0, 5.0], [[1, 1]], [4.0], [GE], lo=[0, 2], hi=[INF, 2])
    sol = solve_lp(lp)
    assert sol.primal[1] == pytest.approx(2.0)
    assert sol.objective == pytest.approx(2.0 + 10.0)


def test_nan_rejected():
    lp = lp_from([np.nan], [[1.0]], [1.0], [LE])
    with pytest.raises(ValueError):
        solve_lp(lp)


# ---------------------------------------------------------------------------
# anti-cycling: the classic degenerate example that cycles under naive
# most-negative pivoting with bad tie-breaks; optimum known by hand: the
# third constraint caps x3 at 1, and pushing x1 to its implied cap gives
# objective -1/20.
# ---------------------------------------------------------------------------

BEALE_C = [-0.75, 150.0, -0.02, 6.0]
BEALE_A = [[0.25, -60.0, -1.0 / 25.0, 9.0],
           [0.5, -90.0, -1.0 / 50.0, 3.0],
           [0.0, 0.0, 1.0, 0.0]]
BEALE_RHS = [0.0, 0.0, 1.0]


@pytest.mark.parametrize("bland_after", [0, 500])
def test_beale_degenerate_terminates(bland_after):
    lp = lp_from(BEALE_C, BEALE_A, BEALE_RHS, [LE, LE, LE])
    sol = solve_lp(lp, bland_after=bland_after)
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(-0.05, abs=1e-10)


# ---------------------------------------------------------------------------
# randomized cross-check against scipy plus strong duality
# ---------------------------------------------------------------------------

def random_lp(rng):
    n = rng.integers(2, 7)
    m = rng.integers(1, 6)
    A = rng.normal(size=(m, n)).round(3)
    x_feas = rng.uniform(0.2, 2.0, size=n)
    rel = [LE if u < 0.6 else (GE if u < 0.8 else EQ)
           for u in rng.uniform(size=m)]
    slackpad = np.array([rng.uniform(0.0, 1.5) if r == LE
                         else (-rng.uniform(0.0, 1.5) if r == GE else 0.0)
                         for r in rel])
    rhs = A @ x_feas + slackpad
    c = rng.normal(size=n).round(3)
    hi = np.where(rng.uniform(size=n) < 0.5, rng.uniform(2.5, 6.0, size=n), INF)
    return lp_from(c, A, rhs, rel, hi=hi)


def test_random_lps_match_scipy():
    from scipy.optimize import linprog
    rng = np.random.default_rng(20240811)
    checked = 0
    for _ in range(60):
        lp = random_lp(rng)
        sol = solve_lp(lp)
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        for i, r in enumerate(lp.rel):
            if r == LE:
                A_ub.append(lp.A[i]); b_ub.append(lp.rhs[i])
            elif r == GE:
                A_ub.append(-lp.A[i]); b_ub.append(-lp.rhs[i])
            else:
                A_eq.append(lp.A[i]); b_eq.append(lp.rhs[i])
        ref = linprog(
            lp.c, A_ub=np.array(A_ub) if A_ub else None,
            b_ub=np.array(b_ub) if b_ub else None,
            A_eq=np.array(A_eq) if A_eq else None,
            b_eq=np.array(b_eq) if b_eq else None,
            bounds=list(zip(lp.lo, [None if h == INF else h for h in lp.hi])),
            method="highs")
        if ref.status == 3:
            assert sol.status == Status.UNBOUNDED
            continue
        if ref.status == 2:
            assert sol.status == Status.INFEASIBLE
            continue
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(ref.fun, abs=1e-6, rel=1e-6)
        checked += 1
    assert checked >= 30


def test_strong_duality_on_random_lps():
    rng = np.random.default_rng(7)
    for _ in range(40):
        lp = random_lp(rng)
        sol = solve_lp(lp)
        if sol.status != Status.OPTIMAL:
            continue
        rel_gap = sol.duality_gap / max(1.0, abs(sol.objective))
        assert rel_gap <= 1e-7
        assert audit_solution(lp, sol).clean


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------

def test_bit_identical_reruns():
    rng = np.random.default_rng(99)
    for _ in range(10):
        lp = random_lp(rng)
        s1 = solve_lp(lp)
        s2 = solve_lp(lp)
        assert s1.status == s2.status
        if s1.status == Status.OPTIMAL:
            assert s1.objective.hex() == s2.objective.hex()
            assert np.array_equal(s1.primal, s2.primal)


# ---------------------------------------------------------------------------
# branch-and-bound over complementarity pairs
# ---------------------------------------------------------------------------

def toy_mp():
    """max x s.t. x <= 4 (paired with m), x <= 10; m >= 0."""
    b = ProgramBuilder(sense="max")
    x = b.add_var("x", lo=-INF, obj=1.0)
    m = b.add_var("m")
    r0 = b.add_row([x], [1.0], LE, 4.0)
    b.add_row([x, m], [1.0, -1.0], LE, 2.0)  # x - m <= 2 forces m >= 2 at x=4
    lp = b.build()
    return MixedProgram(lp=lp, pairs=[ComplementarityPair(m, r0)])


def test_zero_pairs_reduces_to_lp():
    lp = lp_from([1.0], [[1.0]], [3.0], [GE])
    mp = MixedProgram(lp=lp, pairs=[])
    sol = solve_complementarity(mp)
    ref = solve_lp(lp)
    assert sol.objective == ref.objective


def test_pair_forces_row_tight():
    # m must be >= 2 when x > 2, so complementarity m*(4-x)=0 forces x = 4
    sol = solve_complementarity(toy_mp())
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(4.0)
    assert sol.max_complementarity_residual <= 1e-9


def test_single_load_zero_sum_pins_attack():
    # max d' of: inner min x s.t. x >= d + delta with stationarity multiplier,
    # single attackable coordinate forced to zero by the zero-sum row.
    d = 5.0
    b = ProgramBuilder(sense="max")
    x = b.add_var("x", lo=-INF, obj=1.0)
    nu = b.add_var("nu")
    delta = b.add_var("delta", lo=-1.0, hi=1.0)
    r = b.add_row([x, delta], [-1.0, 1.0], LE, -d)   # d + delta - x <= 0
    b.add_row([delta], [1.0], EQ, 0.0)               # zero-sum over one load
    b.add_row([nu], [1.0], EQ, 1.0)                  # stationarity: 1 - nu = 0
    mp = MixedProgram(lp=b.build(), pairs=[ComplementarityPair(nu, r)])
    sol = solve_complementarity(mp)
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(d)


def random_mp(rng):
    n = int(rng.integers(3, 7))
    m = int(rng.integers(2, 5))
    b = ProgramBuilder(sense="min" if rng.uniform() < 0.5 else "max")
    xs = [b.add_var(f"x{j}", lo=0.0, hi=10.0, obj=round(float(rng.normal()), 2))
          for j in range(n)]
    rows = []
    for i in range(m):
        idx = list(range(n))
        coef = rng.normal(size=n).round(2)
        rhs = float(rng.uniform(1.0, 8.0))
        rows.append(b.add_row(idx, coef, LE, rhs))
    pairs = []
    used = set()
    for _ in range(int(rng.integers(1, min(5, n * m)))):
        v = int(rng.integers(0, n))
        r = int(rng.integers(0, m))
        if (v, r) in used:
            continue
        used.add((v, r))
        pairs.append(ComplementarityPair(xs[v], rows[r]))
    return MixedProgram(lp=b.build(), pairs=pairs)


def enumerate_optimum(mp):
    """Exhaustive 2^p reference: best LP over all forcing patterns."""
    from itertools import product
    lp = mp.lp
    is_max = lp.sense == "max"
    best = None
    for pattern in product(("var", "row"), repeat=len(mp.pairs)):
        rel_o, ub_o = {}, {}
        for k, side in enumerate(pattern):
            p = mp.pairs[k]
            if side == "var":
                ub_o[p.multiplier_var] = 0.0
            else:
                rel_o[p.row] = EQ
        sol = solve_lp(lp, rel_override=rel_o, ub_override=ub_o)
        if sol.status != Status.OPTIMAL:
            continue
        if best is None or (sol.objective > best if is_max else sol.objective < best):
            best = sol.objective
    return best


def test_branch_and_bound_matches_enumeration():
    rng = np.random.default_rng(4096)
    done = 0
    for _ in range(25):
        mp = random_mp(rng)
        ref = enumerate_optimum(mp)
        sol = solve_complementarity(mp)
        if ref is None:
            assert sol.status in (Status.INFEASIBLE, Status.UNBOUNDED)
            continue
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(ref, abs=1e-7, rel=1e-7)
        # branch soundness versus the relaxation
        relax = solve_lp(mp.lp)
        if relax.status == Status.OPTIMAL:
            if mp.lp.sense == "max":
                assert sol.objective <= relax.objective + 1e-7
            else:
                assert sol.objective >= relax.objective - 1e-7
        done += 1
    assert done >= 15


def test_branch_and_bound_determinism():
    rng = np.random.default_rng(555)
    mp = random_mp(rng)
    s1 = solve_complementarity(mp)
    s2 = solve_complementarity(mp)
    assert s1.status == s2.status
    if s1.status == Status.OPTIMAL:
        assert s1.objective.hex() == s2.objective.hex()
        assert s1.node_count == s2.node_count


def test_node_limit_reports_iterlimit():
    mp = toy_mp()
    sol = solve_complementarity(mp, node_limit=0)
    assert sol.status in (Status.ITER_LIMIT, Status.INFEASIBLE)


def test_warm_point_seeding():
    mp = toy_mp()
    # x = 4, m = 2 satisfies everything and is complementary (slack row 0)
    warm = np.array([4.0, 2.0])
    sol = solve_complementarity(mp, warm_point=warm)
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(4.0)


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

def test_audit_clean_and_corrupted():
    lp = lp_from([1.0, 2.0], [[1, 1]], [3.0], [GE])
    sol = solve_lp(lp)
    assert audit_solution(lp, sol).clean
    sol.primal[0] -= 1.0  # now violates the >= row
    rep = audit_solution(lp, sol)
    assert any("feasibility" in f for f in rep.findings)


def test_audit_flags_artificial_bound():
    b = ProgramBuilder(sense="max")
    x = b.add_var("x", lo=0.0, hi=50.0, obj=1.0)
    b.mark_artificial_bound(x, 50.0)
    lp = b.build()
    sol = solve_lp(lp)
    rep = audit_solution(lp, sol)
    assert any("bound-active" in f for f in rep.findings)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def test_export_lp_text():
    mp = toy_mp()
    text = export_lp_text(mp)
    assert "Maximize" in text
    assert "Subject To" in text
    assert "Binary" in text
    assert "z0" in text
    assert text.endswith("End\n")
