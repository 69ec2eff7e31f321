"""Self-contained LP kernel: dense two-phase primal simplex plus depth-first
branch-and-bound over complementarity disjunctions.

The simplex runs on a dense tableau with deterministic pivot rules (Dantzig
entering, lowest-row-index ratio ties) and switches to Bland's rule after a
configurable number of degenerate pivots, so every solve is reproducible
bit-for-bit. Complementarity pairs (a nonnegative variable paired with a
<= row) are resolved exactly by branching: one child fixes the variable to
zero, the other makes the row an equality.

Dual conventions (documented once, verified by audit_solution): for a
minimization, reported row duals are the KKT multipliers of each row
normalized to "g(x) <= 0" form, so duals of inequality rows are >= 0 and

    c + sum_k dual_k * grad g_k + bound terms = 0.

``bound_duals`` are reduced costs: >= 0 for a variable at its lower bound,
<= 0 at its upper bound, 0 in the interior. For ``sense="max"`` the same
identities hold with c replaced by -c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = math.inf

FEAS_TOL = 1e-7
OPT_TOL = 1e-9          # absolute branch-and-bound optimality gap
COMPL_TOL = 1e-9        # complementarity residual accepted at an incumbent
PIVOT_TOL = 1e-9
RC_TOL = 1e-9
DEFAULT_ITER_LIMIT = 200_000
DEFAULT_BLAND_AFTER = 500
DEFAULT_NODE_LIMIT = 1_000_000

LE, EQ, GE = "<=", "=", ">="


class Status:
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"


@dataclass
class LinearProgram:
    """Dense LP: optimize c'x subject to rows ``A x (rel) rhs`` and
    per-variable bounds lo <= x <= hi (infinities allowed)."""

    c: np.ndarray
    A: np.ndarray
    rhs: np.ndarray
    rel: list[str]
    lo: np.ndarray
    hi: np.ndarray
    sense: str = "min"
    var_names: list[str] | None = None
    row_names: list[str] | None = None
    # variable index -> cap value installed for numerical reasons only;
    # audit_solution flags solutions leaning on these.
    artificial_bounds: dict[int, float] = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def validate(self) -> None:
        m, n = self.A.shape
        if self.c.shape != (n,) or self.rhs.shape != (m,) or len(self.rel) != m:
            raise ValueError("inconsistent LP dimensions")
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise ValueError("inconsistent bound dimensions")
        for arr in (self.c, self.A, self.rhs):
            if np.isnan(arr).any():
                raise ValueError("NaN coefficient in LP data")
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound exceeds upper bound")
        bad = [r for r in self.rel if r not in (LE, EQ, GE)]
        if bad:
            raise ValueError(f"unknown row relation {bad[0]!r}")
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {self.sense!r}")


@dataclass(frozen=True)
class ComplementarityPair:
    """Requires multiplier_var * slack(row) = 0; the variable must have a
    zero lower bound and the row must be a <= inequality."""

    multiplier_var: int
    row: int


@dataclass
class MixedProgram:
    lp: LinearProgram
    pairs: list[ComplementarityPair] = field(default_factory=list)

    def validate(self) -> None:
        self.lp.validate()
        for p in self.pairs:
            if not (0 <= p.multiplier_var < self.lp.n_vars):
                raise ValueError(f"pair variable {p.multiplier_var} out of range")
            if not (0 <= p.row < self.lp.n_rows):
                raise ValueError(f"pair row {p.row} out of range")
            if self.lp.lo[p.multiplier_var] != 0.0:
                raise ValueError("pair multiplier variable must have lower bound 0")
            if self.lp.rel[p.row] != LE:
                raise ValueError("pair row must be a <= inequality")


@dataclass
class Solution:
    status: str
    objective: float = math.nan
    primal: np.ndarray | None = None
    duals: np.ndarray | None = None
    bound_duals: np.ndarray | None = None
    node_count: int = 0
    max_complementarity_residual: float = 0.0
    iterations: int = 0
    duality_gap: float = math.nan
    # phase-1 row multipliers proving infeasibility, when status=Infeasible
    infeasibility_certificate: np.ndarray | None = None
    unbounded_ray_var: int | None = None

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL


class ProgramBuilder:
    """Incremental LP assembly with named variables and rows."""

    def __init__(self, sense: str = "min"):
        self.sense = sense
        self._obj: list[float] = []
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._var_names: list[str] = []
        self._rows: list[tuple[list[int], list[float], str, float]] = []
        self._row_names: list[str] = []
        self.artificial_bounds: dict[int, float] = {}

    def add_var(self, name: str, lo: float = 0.0, hi: float = INF,
                obj: float = 0.0) -> int:
        self._var_names.append(name)
        self._lo.append(lo)
        self._hi.append(hi)
        self._obj.append(obj)
        return len(self._var_names) - 1

    def add_vars(self, prefix: str, count: int, lo: float = 0.0,
                 hi: float = INF, obj: float = 0.0) -> np.ndarray:
        idx = [self.add_var(f"{prefix}[{i}]", lo, hi, obj) for i in range(count)]
        return np.asarray(idx, dtype=int)

    def set_objective(self, var: int, coeff: float) -> None:
        self._obj[var] = coeff

    def add_row(self, idx, coef, rel: str, rhs: float, name: str = "") -> int:
        idx = [int(i) for i in idx]
        coef = [float(v) for v in coef]
        if len(idx) != len(coef):
            raise ValueError("row index/coefficient length mismatch")
        self._rows.append((idx, coef, rel, float(rhs)))
        self._row_names.append(name or f"r{len(self._rows) - 1}")
        return len(self._rows) - 1

    def mark_artificial_bound(self, var: int, value: float) -> None:
        self.artificial_bounds[var] = value

    @property
    def n_vars(self) -> int:
        return len(self._var_names)

    def build(self) -> LinearProgram:
        n = len(self._var_names)
        m = len(self._rows)
        A = np.zeros((m, n))
        rhs = np.zeros(m)
        rel = []
        for r, (idx, coef, rl, b) in enumerate(self._rows):
            A[r, idx] = coef
            rhs[r] = b
            rel.append(rl)
        lp = LinearProgram(
            c=np.asarray(self._obj, dtype=float),
            A=A,
            rhs=rhs,
            rel=rel,
            lo=np.asarray(self._lo, dtype=float),
            hi=np.asarray(self._hi, dtype=float),
            sense=self.sense,
            var_names=list(self._var_names),
            row_names=list(self._row_names),
            artificial_bounds=dict(self.artificial_bounds),
        )
        lp.validate()
        return lp


# ---------------------------------------------------------------------------
# standard-form conversion
# ---------------------------------------------------------------------------

@dataclass
class _StdForm:
    """min c'u, A u = b, u >= 0 plus bookkeeping to map a solution back."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    n_struct: int                  # structural columns (before slacks)
    var_kind: list[tuple]          # per original var: transform record
    row_flip: np.ndarray           # +-1 per std row
    witness_col: np.ndarray        # per std row: column with a single +-1 entry
    witness_sign: np.ndarray       # its coefficient (post-flip)
    artificial_cols: np.ndarray    # bool mask over columns
    n_orig_rows: int
    bound_row_of_var: dict[int, int]   # two-sided var -> std row index
    obj_shift: float               # constant folded out of the objective
    basic_init: np.ndarray | None = None


def _standardize(lp: LinearProgram, rel_override: dict[int, str] | None,
                 ub_override: dict[int, float] | None) -> _StdForm | Solution:
    """Convert to equality standard form. May detect trivial infeasibility
    from fixed variables (returns a Solution in that case)."""
    n = lp.n_vars
    m = lp.n_rows
    lo = lp.lo.copy()
    hi = lp.hi.copy()
    if ub_override:
        for j, v in ub_override.items():
            hi[j] = min(hi[j], v)
    rel = list(lp.rel)
    if rel_override:
        for r, v in rel_override.items():
            rel[r] = v
    if np.any(lo > hi + 0.0):
        return Solution(status=Status.INFEASIBLE)

    cmin = lp.c if lp.sense == "min" else -lp.c

    # transform records: ('fixed', value) | ('shift', col, lo) |
    # ('neg', col, hi) | ('split', col_plus)  [col_minus = col_plus + 1]
    var_kind: list[tuple] = [()] * n
    col_of: list[int] = [-1] * n
    ncol = 0
    two_sided: list[int] = []
    for j in range(n):
        l, h = lo[j], hi[j]
        if l == h:
            var_kind[j] = ("fixed", l)
        elif l == -INF and h == INF:
            var_kind[j] = ("split", ncol)
            col_of[j] = ncol
            ncol += 2
        elif l == -INF:
            var_kind[j] = ("neg", ncol, h)
            col_of[j] = ncol
            ncol += 1
        else:
            var_kind[j] = ("shift", ncol, l)
            col_of[j] = ncol
            ncol += 1
            if h != INF:
                two_sided.append(j)

    n_bound_rows = len(two_sided)
    m_std = m + n_bound_rows
    n_struct = ncol

    A = np.zeros((m_std, n_struct))
    b = np.zeros(m_std)
    c = np.zeros(n_struct)
    obj_shift = 0.0

    for j in range(n):
        k = var_kind[j]
        if k[0] == "fixed":
            obj_shift += cmin[j] * k[1]
        elif k[0] == "shift":
            c[k[1]] += cmin[j]
            obj_shift += cmin[j] * k[2]
        elif k[0] == "neg":
            c[k[1]] -= cmin[j]
            obj_shift += cmin[j] * k[2]
        else:  # split
            c[k[1]] += cmin[j]
            c[k[1] + 1] -= cmin[j]

    # structural part of the original rows under the variable transform
    for j in range(n):
        k = var_kind[j]
        colA = lp.A[:, j]
        if k[0] == "fixed":
            b[:m] -= colA * k[1]
        elif k[0] == "shift":
            A[:m, k[1]] += colA
            b[:m] -= colA * k[2]
        elif k[0] == "neg":
            A[:m, k[1]] -= colA
            b[:m] -= colA * k[2]
        else:
            A[:m, k[1]] += colA
            A[:m, k[1] + 1] -= colA
    b[:m] += lp.rhs

    bound_row_of_var: dict[int, int] = {}
    for i, j in enumerate(two_sided):
        r = m + i
        A[r, col_of[j]] = 1.0
        b[r] = hi[j] - lo[j]
        bound_row_of_var[j] = r

    rel_std = rel + [LE] * n_bound_rows

    # slack / surplus columns
    ineq_rows = [i for i in range(m_std) if rel_std[i] != EQ]
    S = np.zeros((m_std, len(ineq_rows)))
    slack_col_of_row = {}
    for k, i in enumerate(ineq_rows):
        S[i, k] = 1.0 if rel_std[i] == LE else -1.0
        slack_col_of_row[i] = n_struct + k
    A = np.hstack([A, S])
    c = np.concatenate([c, np.zeros(len(ineq_rows))])

    # flip rows with negative rhs
    flip = np.where(b < 0, -1.0, 1.0)
    A *= flip[:, None]
    b *= flip

    # rows that already own a +1 slack column form the initial basis; the
    # rest receive artificial columns.
    needs_art = []
    witness_col = np.full(m_std, -1, dtype=int)
    witness_sign = np.ones(m_std)
    basic_init = np.full(m_std, -1, dtype=int)
    for i in range(m_std):
        sc = slack_col_of_row.get(i)
        if sc is not None:
            witness_col[i] = sc
            witness_sign[i] = A[i, sc]
            if A[i, sc] == 1.0:
                basic_init[i] = sc
                continue
        needs_art.append(i)

    n_before_art = A.shape[1]
    if needs_art:
        Art = np.zeros((m_std, len(needs_art)))
        for k, i in enumerate(needs_art):
            Art[i, k] = 1.0
            basic_init[i] = n_before_art + k
            if witness_col[i] < 0:
                witness_col[i] = n_before_art + k
                witness_sign[i] = 1.0
        A = np.hstack([A, Art])
        c = np.concatenate([c, np.zeros(len(needs_art))])
    art_mask = np.zeros(A.shape[1], dtype=bool)
    art_mask[n_before_art:] = True

    return _StdForm(
        A=A, b=b, c=c, n_struct=n_struct, var_kind=var_kind,
        row_flip=flip, witness_col=witness_col, witness_sign=witness_sign,
        artificial_cols=art_mask, n_orig_rows=m,
        bound_row_of_var=bound_row_of_var, obj_shift=obj_shift,
        basic_init=basic_init,
    )


# ---------------------------------------------------------------------------
# simplex core
# ---------------------------------------------------------------------------

def _pivot(T: np.ndarray, basis: np.ndarray, i: int, j: int) -> None:
    piv = T[i] / T[i, j]
    colv = T[:, j].copy()
    colv[i] = 0.0
    T -= np.outer(colv, piv)
    T[i] = piv
    basis[i] = j


def _run_simplex(T: np.ndarray, basis: np.ndarray, blocked: np.ndarray,
                 iter_limit: int, bland_after: int,
                 iters_used: int) -> tuple[str, int]:
    """Price-and-pivot loop on tableau T (last row = reduced costs, last
    column = rhs). Returns (status, iterations)."""
    m = T.shape[0] - 1
    bland = bland_after <= 0
    degen = 0
    it = iters_used
    while True:
        rc = T[-1, :-1].copy()
        rc[blocked] = 0.0
        if bland:
            elig = np.nonzero(rc < -RC_TOL)[0]
            if elig.size == 0:
                return "optimal", it
            j = int(elig[0])
        else:
            j = int(np.argmin(rc))
            if rc[j] >= -RC_TOL:
                return "optimal", it
        col = T[:m, j]
        pos = np.nonzero(col > PIVOT_TOL)[0]
        if pos.size == 0:
            return "unbounded_%d" % j, it
        ratios = T[pos, -1] / col[pos]
        rmin = ratios.min()
        ties = pos[np.nonzero(ratios <= rmin + 1e-12)[0]]
        if bland:
            i = int(ties[np.argmin(basis[ties])])
        else:
            i = int(ties[0])
        before = T[-1, -1]
        _pivot(T, basis, i, j)
        it += 1
        if it >= iter_limit:
            return "iterlimit", it
        if abs(T[-1, -1] - before) <= 1e-12:
            degen += 1
            if degen >= bland_after:
                bland = True
        else:
            degen = 0


def solve_lp(lp: LinearProgram,
             rel_override: dict[int, str] | None = None,
             ub_override: dict[int, float] | None = None,
             iter_limit: int = DEFAULT_ITER_LIMIT,
             bland_after: int = DEFAULT_BLAND_AFTER) -> Solution:
    """Solve an LP with the two-phase primal simplex.

    ``rel_override`` / ``ub_override`` apply per-call modifications (used by
    branch-and-bound) without mutating the input program.
    """
    lp.validate()
    std = _standardize(lp, rel_override, ub_override)
    if isinstance(std, Solution):
        return std

    A, b, c = std.A, std.b, std.c
    m, N = A.shape
    basis = std.basic_init.copy()

    T = np.zeros((m + 1, N + 1))
    T[:m, :N] = A
    T[:m, -1] = b

    # phase 1: minimize sum of artificials
    if std.artificial_cols.any():
        c1 = np.zeros(N)
        c1[std.artificial_cols] = 1.0
        T[-1, :N] = c1
        for i in range(m):
            if c1[basis[i]] != 0.0:
                T[-1] -= c1[basis[i]] * T[i]
        status, iters = _run_simplex(T, basis, np.zeros(N, dtype=bool),
                                     iter_limit, bland_after, 0)
        phase1_obj = -T[-1, -1]
        if status == "iterlimit":
            return Solution(status=Status.ITER_LIMIT, iterations=iters)
        if status.startswith("unbounded"):
            raise RuntimeError("phase-1 objective reported unbounded; "
                               "numerical breakdown in simplex")
        if phase1_obj > FEAS_TOL:
            cert = np.array([
                -T[-1, std.witness_col[i]] / std.witness_sign[i] * std.row_flip[i]
                for i in range(std.n_orig_rows)
            ])
            return Solution(status=Status.INFEASIBLE, iterations=iters,
                            infeasibility_certificate=cert)
        # drive basic artificials out of the basis (degenerate pivots keep
        # every rhs unchanged because the leaving row sits at level zero);
        # rows whose structural part is entirely zero are redundant and keep
        # their artificial basic at level zero forever.
        art_idx = np.nonzero(std.artificial_cols)[0]
        art_set = set(int(a) for a in art_idx)
        for i in range(m):
            if basis[i] in art_set and T[i, -1] <= FEAS_TOL:
                candidates = np.nonzero(
                    (np.abs(T[i, :N]) > PIVOT_TOL) & ~std.artificial_cols)[0]
                if candidates.size:
                    _pivot(T, basis, i, int(candidates[0]))
    else:
        iters = 0

    # phase 2: original objective; artificial columns may not re-enter
    T[-1, :] = 0.0
    T[-1, :N] = c
    for i in range(m):
        if c[basis[i]] != 0.0:
            T[-1] -= c[basis[i]] * T[i]
    status, iters = _run_simplex(T, basis, std.artificial_cols,
                                 iter_limit, bland_after, iters)
    if status == "iterlimit":
        return Solution(status=Status.ITER_LIMIT, iterations=iters)
    if status.startswith("unbounded"):
        jcol = int(status.split("_")[1])
        ray_var = None
        for j, k in enumerate(std.var_kind):
            if k and k[0] != "fixed" and len(k) > 1 and isinstance(k[1], int):
                if k[1] == jcol or (k[0] == "split" and k[1] + 1 == jcol):
                    ray_var = j
                    break
        sol = Solution(status=Status.UNBOUNDED, iterations=iters,
                       unbounded_ray_var=ray_var)
        if lp.sense == "max":
            sol.objective = INF
        else:
            sol.objective = -INF
        return sol

    # recover primal values
    u = np.zeros(N)
    u[basis] = T[:m, -1]
    x = np.zeros(lp.n_vars)
    for j, k in enumerate(std.var_kind):
        if k[0] == "fixed":
            x[j] = k[1]
        elif k[0] == "shift":
            x[j] = u[k[1]] + k[2]
        elif k[0] == "neg":
            x[j] = k[2] - u[k[1]]
        else:
            x[j] = u[k[1]] - u[k[1] + 1]

    obj_min = T[-1, -1] * -1.0 + std.obj_shift
    # y in "c_B B^-1" algebra, per std row, then mapped to KKT multipliers
    rcrow = T[-1, :N]
    y_std = np.array([
        (0.0 - rcrow[std.witness_col[i]]) / std.witness_sign[i]
        for i in range(m)
    ])
    y_user = y_std * std.row_flip

    rel_eff = list(lp.rel)
    if rel_override:
        for r, v in rel_override.items():
            rel_eff[r] = v

    duals = np.zeros(lp.n_rows)
    for i in range(lp.n_rows):
        if rel_eff[i] == GE:
            duals[i] = y_user[i]
        else:
            duals[i] = -y_user[i]

    # reduced costs per original variable
    z = np.zeros(lp.n_vars)
    for j, k in enumerate(std.var_kind):
        if k[0] == "fixed":
            z[j] = 0.0
        elif k[0] in ("shift", "split"):
            z[j] = rcrow[k[1]]
        else:  # neg
            z[j] = -rcrow[k[1]]
    # fold duals of synthetic two-sided bound rows into reduced costs
    for j, r in std.bound_row_of_var.items():
        z[j] += y_user[r] * 1.0  # row is u_j <= width: rc contribution -dual
    # for a two-sided var at its upper bound the bound-row dual is positive
    # in y algebra; reported reduced cost must then be <= 0, which the fold
    # above produces since y_user[r] <= 0 there.

    if lp.sense == "max":
        objective = -obj_min
    else:
        objective = obj_min

    # duality gap (min-form): D = -sum duals*g-const + bound terms
    gap = _duality_gap(lp, rel_eff, ub_override, x, duals, z, obj_min)

    return Solution(status=Status.OPTIMAL, objective=objective, primal=x,
                    duals=duals, bound_duals=z, iterations=iters,
                    duality_gap=gap)


def _duality_gap(lp: LinearProgram, rel_eff: list[str],
                 ub_override: dict[int, float] | None,
                 x: np.ndarray, duals: np.ndarray, z: np.ndarray,
                 obj_min: float) -> float:
    """|primal - dual| objective for the min-form problem."""
    hi = lp.hi.copy()
    if ub_override:
        for j, v in ub_override.items():
            hi[j] = min(hi[j], v)
    D = 0.0
    for i in range(lp.n_rows):
        if rel_eff[i] == GE:
            D += duals[i] * lp.rhs[i]
        else:
            D -= duals[i] * lp.rhs[i]
    # theta-convention: for <=/= rows L includes theta*(a'x - r), for >=
    # rows theta*(r - a'x); at stationarity inf_x L = const part below.
    for j in range(lp.n_vars):
        if z[j] > 0 and lp.lo[j] != -INF:
            D += z[j] * lp.lo[j]
        elif z[j] < 0 and hi[j] != INF:
            D += z[j] * hi[j]
    return abs(obj_min - D)


# ---------------------------------------------------------------------------
# branch-and-bound over complementarity disjunctions
# ---------------------------------------------------------------------------

def _pair_violations(mp: MixedProgram, x: np.ndarray,
                     forced: dict[int, str]) -> np.ndarray:
    lp = mp.lp
    out = np.zeros(len(mp.pairs))
    for k, p in enumerate(mp.pairs):
        if k in forced:
            continue
        v = max(0.0, x[p.multiplier_var])
        slack = lp.rhs[p.row] - float(lp.A[p.row] @ x)
        out[k] = v * max(0.0, slack)
    return out


def _forced_overrides(mp: MixedProgram, forced: dict[int, str]
                      ) -> tuple[dict[int, str], dict[int, float]]:
    rel_o: dict[int, str] = {}
    ub_o: dict[int, float] = {}
    for k, side in forced.items():
        p = mp.pairs[k]
        if side == "var":
            ub_o[p.multiplier_var] = 0.0
        else:
            rel_o[p.row] = EQ
    return rel_o, ub_o


def _complete_pattern(mp: MixedProgram, x: np.ndarray,
                      forced: dict[int, str]) -> dict[int, str]:
    """Extend a branching pattern to cover every pair, guided by x."""
    full = dict(forced)
    lp = mp.lp
    for k, p in enumerate(mp.pairs):
        if k in full:
            continue
        slack = lp.rhs[p.row] - float(lp.A[p.row] @ x)
        if x[p.multiplier_var] <= slack:
            full[k] = "var"
        else:
            full[k] = "row"
    return full


def solve_complementarity(mp: MixedProgram,
                          node_limit: int = DEFAULT_NODE_LIMIT,
                          iter_limit: int = DEFAULT_ITER_LIMIT,
                          warm_point: np.ndarray | None = None,
                          warm_points: list[np.ndarray] | None = None
                          ) -> Solution:
    """Globally optimal solution of an LP with complementarity pairs.

    ``warm_point``/``warm_points``: optional feasible, complementary points
    used to seed the incumbent bound (each is re-derived through its induced
    branching pattern, never returned verbatim).
    """
    mp.validate()
    lp = mp.lp
    if not mp.pairs:
        sol = solve_lp(lp, iter_limit=iter_limit)
        sol.node_count = 1
        return sol

    is_max = lp.sense == "max"

    def better(a: float, b: float) -> bool:
        return a > b + OPT_TOL if is_max else a < b - OPT_TOL

    best: Solution | None = None
    best_pattern: dict[int, str] | None = None

    candidates = list(warm_points or [])
    if warm_point is not None:
        candidates.insert(0, warm_point)
    for cand in candidates:
        if cand is None:
            continue
        seeded = _try_warm_point(mp, cand, iter_limit)
        if seeded is None:
            continue
        if best is None or better(seeded[0].objective, best.objective):
            best, best_pattern = seeded

    nodes = 0
    hit_limit = False
    stack: list[dict[int, str]] = [{}]
    while stack:
        forced = stack.pop()
        if nodes >= node_limit:
            hit_limit = True
            break
        nodes += 1
        rel_o, ub_o = _forced_overrides(mp, forced)
        sol = solve_lp(lp, rel_override=rel_o, ub_override=ub_o,
                       iter_limit=iter_limit)
        if sol.status == Status.INFEASIBLE:
            continue
        if sol.status == Status.ITER_LIMIT:
            hit_limit = True
            break
        if sol.status == Status.UNBOUNDED:
            if len(forced) == len(mp.pairs):
                return Solution(status=Status.UNBOUNDED, node_count=nodes)
            k = min(i for i in range(len(mp.pairs)) if i not in forced)
            stack.append({**forced, k: "row"})
            stack.append({**forced, k: "var"})
            continue
        if best is not None and not better(sol.objective, best.objective):
            continue
        viol = _pair_violations(mp, sol.primal, forced)
        worst = float(viol.max()) if viol.size else 0.0
        if worst <= COMPL_TOL:
            best = sol
            best_pattern = _complete_pattern(mp, sol.primal, forced)
            continue
        k = int(np.argmax(viol))  # ties: argmax returns lowest index
        p = mp.pairs[k]
        slack = lp.rhs[p.row] - float(lp.A[p.row] @ sol.primal)
        first = "var" if sol.primal[p.multiplier_var] <= slack else "row"
        second = "row" if first == "var" else "var"
        stack.append({**forced, k: second})
        stack.append({**forced, k: first})

    if best is None:
        return Solution(
            status=Status.ITER_LIMIT if hit_limit else Status.INFEASIBLE,
            node_count=nodes)

    # polish: re-solve the winner's complete pattern for a full dual picture
    rel_o, ub_o = _forced_overrides(mp, best_pattern)
    final = solve_lp(lp, rel_override=rel_o, ub_override=ub_o,
                     iter_limit=iter_limit)
    if final.status != Status.OPTIMAL or (
            best.primal is not None
            and better(best.objective, final.objective)):
        final = best
    final.node_count = nodes
    final.max_complementarity_residual = float(
        _pair_violations(mp, final.primal, {}).max())
    final.status = Status.ITER_LIMIT if hit_limit else Status.OPTIMAL
    return final


def _try_warm_point(mp: MixedProgram, x: np.ndarray, iter_limit: int,
                    improve_rounds: int = 8
                    ) -> tuple[Solution, dict[int, str]] | None:
    """Validate a candidate point and turn it into an incumbent.

    The point's induced branching pattern is re-solved as a fully forced LP;
    the LP optimum suggests a new pattern, which is iterated a few rounds
    (every iterate is a valid fully complementary point, so the best one is
    a sound incumbent)."""
    lp = mp.lp
    if x.shape != (lp.n_vars,) or np.isnan(x).any():
        return None
    res = _feasibility_residual(lp, x)
    if res > FEAS_TOL * 10:
        return None
    compl = _pair_violations(mp, x, {})
    if compl.size and compl.max() > COMPL_TOL * 10:
        return None
    is_max = lp.sense == "max"
    best: Solution | None = None
    best_pattern: dict[int, str] | None = None
    point = x
    seen_patterns: set[tuple] = set()
    for _ in range(max(1, improve_rounds)):
        pattern = _complete_pattern(mp, point, {})
        key = tuple(sorted(pattern.items()))
        if key in seen_patterns:
            break
        seen_patterns.add(key)
        rel_o, ub_o = _forced_overrides(mp, pattern)
        sol = solve_lp(lp, rel_override=rel_o, ub_override=ub_o,
                       iter_limit=iter_limit)
        if sol.status != Status.OPTIMAL:
            break
        if best is None or (sol.objective > best.objective + OPT_TOL if is_max
                            else sol.objective < best.objective - OPT_TOL):
            best = sol
            best_pattern = pattern
            point = sol.primal
        else:
            break
    if best is None:
        return None
    return best, best_pattern


def _feasibility_residual(lp: LinearProgram, x: np.ndarray) -> float:
    Ax = lp.A @ x
    res = 0.0
    for i in range(lp.n_rows):
        d = Ax[i] - lp.rhs[i]
        if lp.rel[i] == LE:
            res = max(res, d)
        elif lp.rel[i] == GE:
            res = max(res, -d)
        else:
            res = max(res, abs(d))
    res = max(res, float(np.max(np.where(lp.lo > -INF, lp.lo - x, 0.0), initial=0.0)))
    res = max(res, float(np.max(np.where(lp.hi < INF, x - lp.hi, 0.0), initial=0.0)))
    return res


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

@dataclass
class AuditReport:
    findings: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.findings


def audit_solution(mp: MixedProgram | LinearProgram, sol: Solution,
                   bound_proximity_tol: float = 1e-6) -> AuditReport:
    """Recompute every residual of an Optimal solution from scratch.

    Checks primal feasibility, dual sign conventions, stationarity,
    complementarity of rows/bounds/pairs, and flags variables sitting within
    ``bound_proximity_tol`` of an artificial bound.
    """
    if isinstance(mp, LinearProgram):
        mp = MixedProgram(lp=mp, pairs=[])
    lp = mp.lp
    rep = AuditReport()
    if sol.status != Status.OPTIMAL:
        rep.findings.append(f"solution status is {sol.status}, not Optimal")
        return rep
    x = sol.primal
    res = _feasibility_residual(lp, x)
    if res > FEAS_TOL:
        rep.findings.append(f"primal feasibility violated by {res:.3e}")

    if sol.duals is not None and sol.bound_duals is not None:
        y, z = sol.duals, sol.bound_duals
        for i in range(lp.n_rows):
            if lp.rel[i] != EQ and y[i] < -1e-7:
                rep.findings.append(f"negative inequality dual on row {i}: {y[i]:.3e}")
        cmin = lp.c if lp.sense == "min" else -lp.c
        grad = cmin.copy()
        for i in range(lp.n_rows):
            if lp.rel[i] == GE:
                grad -= y[i] * lp.A[i]
            else:
                grad += y[i] * lp.A[i]
        grad -= z
        sres = float(np.max(np.abs(grad)))
        scale = max(1.0, float(np.max(np.abs(cmin))))
        if sres > 1e-6 * scale:
            rep.findings.append(f"stationarity residual {sres:.3e}")
        Ax = lp.A @ x
        for i in range(lp.n_rows):
            if lp.rel[i] == EQ:
                continue
            slack = lp.rhs[i] - Ax[i] if lp.rel[i] == LE else Ax[i] - lp.rhs[i]
            if abs(y[i] * slack) > 1e-5 * max(1.0, abs(lp.rhs[i])):
                rep.findings.append(
                    f"row {i} complementarity residual {abs(y[i]*slack):.3e}")

    for k, p in enumerate(mp.pairs):
        v = max(0.0, x[p.multiplier_var])
        slack = lp.rhs[p.row] - float(lp.A[p.row] @ x)
        if v * max(0.0, slack) > COMPL_TOL * 10:
            rep.findings.append(
                f"pair {k} complementarity residual {v * max(0.0, slack):.3e}")

    for j, cap in lp.artificial_bounds.items():
        if abs(x[j] - cap) <= bound_proximity_tol:
            name = lp.var_names[j] if lp.var_names else str(j)
            rep.findings.append(
                f"bound-active: variable {name} within {bound_proximity_tol:g} "
                f"of artificial bound {cap:g}")
    return rep


# ---------------------------------------------------------------------------
# LP-format export (big-M mode for complementarities)
# ---------------------------------------------------------------------------

def export_lp_text(mp: MixedProgram | LinearProgram,
                   big_m: float | None = None) -> str:
    """Render a program in CPLEX LP text format for external cross-checks.

    Complementarity pairs are materialized with binary switches and big-M
    bounds (export only; the internal path always branches). Default M is
    1e4 x max(|c|, |rhs|).
    """
    if isinstance(mp, LinearProgram):
        mp = MixedProgram(lp=mp, pairs=[])
    lp = mp.lp
    vn = lp.var_names or [f"x{j}" for j in range(lp.n_vars)]
    rn = lp.row_names or [f"c{i}" for i in range(lp.n_rows)]
    vn = [_lp_safe(s) for s in vn]
    rn = [_lp_safe(s) for s in rn]
    if big_m is None:
        big_m = 1e4 * max(1.0, float(np.max(np.abs(lp.c))),
                          float(np.max(np.abs(lp.rhs))) if lp.n_rows else 0.0)

    out = []
    out.append("\\ exported by gridsynth")
    out.append("Minimize" if lp.sense == "min" else "Maximize")
    terms = [f"{lp.c[j]:+.12g} {vn[j]}" for j in range(lp.n_vars) if lp.c[j] != 0]
    out.append(" obj: " + (" ".join(terms) if terms else "0 " + vn[0]))
    out.append("Subject To")
    relmap = {LE: "<=", EQ: "=", GE: ">="}
    for i in range(lp.n_rows):
        nz = np.nonzero(lp.A[i])[0]
        expr = " ".join(f"{lp.A[i, j]:+.12g} {vn[j]}" for j in nz) or f"0 {vn[0]}"
        out.append(f" {rn[i]}: {expr} {relmap[lp.rel[i]]} {lp.rhs[i]:.12g}")
    for k, p in enumerate(mp.pairs):
        i = p.row
        nz = np.nonzero(lp.A[i])[0]
        expr = " ".join(f"{lp.A[i, j]:+.12g} {vn[j]}" for j in nz)
        # slack_i <= M*(1-z_k)  <=>  -a'x - M z <= M - rhs... keep direct form:
        out.append(f" compl_var_{k}: +1 {vn[p.multiplier_var]} "
                   f"{big_m:+.12g} z{k} <= {big_m:.12g}")
        out.append(f" compl_row_{k}: {expr} {-big_m:+.12g} z{k} >= "
                   f"{lp.rhs[i] - big_m:.12g}")
    out.append("Bounds")
    for j in range(lp.n_vars):
        l, h = lp.lo[j], lp.hi[j]
        if l == -INF and h == INF:
            out.append(f" {vn[j]} free")
        elif h == INF:
            out.append(f" {l:.12g} <= {vn[j]}")
        else:
            lstr = f"{l:.12g}" if l != -INF else "-inf"
            out.append(f" {lstr} <= {vn[j]} <= {h:.12g}")
    if mp.pairs:
        out.append("Binary")
        for k in range(len(mp.pairs)):
            out.append(f" z{k}")
    out.append("End")
    return "\n".join(out) + "\n"


def _lp_safe(s: str) -> str:
    for ch in "[](),= +-*/":
        s = s.replace(ch, "_")
    return s
