"""Differential-privacy primitives: Laplace sampling, the two data queries
(loads and dispatch cost), noisy-argmax constraint selection, and an exact
privacy accountant.

Randomness discipline: every draw comes from a PCG64 generator derived from
a 64-bit root seed through ``numpy.random.SeedSequence`` spawn keys, one
stream per query (and one per (iteration, candidate) inside the selection
loop), so runs are reproducible and parallelizable without stream overlap.
Budget arithmetic uses ``fractions.Fraction`` end to end; floats only ever
touch noise scales, never the ledger.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .attack import AttackSet, ro_attack_reduced
from .compact import CompactModel, attackable_rows
from .opf import solve_opf


@dataclass(frozen=True)
class RngSeed:
    seed: int

    def stream(self, *key: int) -> np.random.Generator:
        """Independent generator for a named substream."""
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(key))))


def laplace(scale: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent zero-mean Laplace draws with the given scale (variance
    2*scale^2 each), via the inverse CDF applied to a uniform stream."""
    if scale <= 0:
        raise ValueError("Laplace scale must be positive")
    u = rng.uniform(size=n) - 0.5
    # inverse CDF: x = -scale * sign(u) * log(1 - 2|u|)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


# ---------------------------------------------------------------------------
# budget split and ledger
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrivacyParams:
    """Adjacency alpha (MW), total privacy loss epsilon, and the per-query
    split. ``eps3``/``tau`` are only set for the selection-based split."""

    alpha: float
    epsilon: Fraction
    eps1: Fraction
    eps2: Fraction
    eps3: Fraction | None = None
    tau: int | None = None

    def __post_init__(self):
        total = self.eps1 + self.eps2
        if self.eps3 is not None:
            if self.tau is None or self.tau < 1:
                raise ValueError("a selection budget requires tau >= 1")
            total = total + self.tau * self.eps3
        if total != self.epsilon:
            raise ValueError(
                f"split does not sum to epsilon exactly: {total} != {self.epsilon}")

    @staticmethod
    def two_query(alpha: float, epsilon) -> "PrivacyParams":
        """Halved split for the two-query pipelines (plain post-processing
        and the full attack-aware release)."""
        eps = Fraction(epsilon)
        return PrivacyParams(alpha=alpha, epsilon=eps,
                             eps1=eps / 2, eps2=eps / 2)

    @staticmethod
    def with_selection(alpha: float, epsilon, tau: int) -> "PrivacyParams":
        """Thirds split with the last third spread over tau selection
        rounds."""
        eps = Fraction(epsilon)
        if tau < 1:
            raise ValueError("tau must be at least 1")
        return PrivacyParams(alpha=alpha, epsilon=eps, eps1=eps / 3,
                             eps2=eps / 3, eps3=eps / (3 * tau), tau=tau)


@dataclass(frozen=True)
class LedgerEntry:
    query: str
    sensitivity: float
    noise_scale: float
    eps: Fraction


@dataclass
class Ledger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def charge(self, query: str, sensitivity: float, noise_scale: float,
               eps: Fraction) -> LedgerEntry:
        entry = LedgerEntry(query=query, sensitivity=sensitivity,
                            noise_scale=noise_scale, eps=Fraction(eps))
        self.entries.append(entry)
        return entry

    @property
    def total(self) -> Fraction:
        return sum((e.eps for e in self.entries), Fraction(0))

    def to_json_dict(self) -> dict:
        return {
            "entries": [{
                "query": e.query,
                "sensitivity": e.sensitivity,
                "noise_scale": e.noise_scale,
                "eps": str(e.eps),
                "eps_float": float(e.eps),
            } for e in self.entries],
            "total": str(self.total),
            "total_float": float(self.total),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


@dataclass
class AccountVerdict:
    ok: bool
    problems: list[str] = field(default_factory=list)


# expected per-query budgets by query name prefix
_QUERY_BUDGET = {
    "load_obfuscation": "eps1",
    "cost_obfuscation": "eps2",
    "constraint_selection": "eps3",
}


def account(params: PrivacyParams, ledger: Ledger) -> AccountVerdict:
    """Exact verdict: the ledger must charge each query within its declared
    budget and the total must equal epsilon (rational arithmetic, never
    floats)."""
    problems: list[str] = []
    n_selection = 0
    for i, e in enumerate(ledger.entries):
        base = e.query.split("[")[0]
        slot = _QUERY_BUDGET.get(base)
        if slot is None:
            problems.append(f"entry {i} ({e.query}): unbudgeted query")
            continue
        budget: Fraction | None = getattr(params, slot)
        if budget is None:
            problems.append(f"entry {i} ({e.query}): no {slot} in the split")
            continue
        if e.eps > budget:
            problems.append(
                f"entry {i} ({e.query}): charged {e.eps} exceeds {slot}={budget}")
        if base == "constraint_selection":
            n_selection += 1
    if params.tau is not None and n_selection > params.tau:
        problems.append(
            f"{n_selection} selection rounds exceed tau={params.tau}")
    if ledger.total != params.epsilon:
        problems.append(
            f"ledger total {ledger.total} != declared epsilon {params.epsilon}")
    return AccountVerdict(ok=not problems, problems=problems)


# ---------------------------------------------------------------------------
# data-touching queries
# ---------------------------------------------------------------------------

def obfuscate_loads(d: np.ndarray, alpha: float, eps1: Fraction,
                    rng: np.random.Generator,
                    ledger: Ledger | None = None
                    ) -> tuple[np.ndarray, LedgerEntry]:
    """Noisy loads: d + Laplace(alpha/eps1) per bus. The identity query has
    sensitivity alpha under single-coordinate adjacency."""
    if eps1 <= 0:
        raise ValueError("eps1 must be positive")
    d = np.asarray(d, dtype=float)
    scale = alpha / float(eps1)
    noisy = d + laplace(scale, len(d), rng)
    entry = LedgerEntry(query="load_obfuscation", sensitivity=alpha,
                        noise_scale=scale, eps=Fraction(eps1))
    if ledger is not None:
        ledger.entries.append(entry)
    return noisy, entry


def max_generator_cost(model: CompactModel, include_psi: bool = False) -> float:
    """Sensitivity anchor for the cost query: the most expensive generator
    (optionally the violation penalty, for users who judge active
    violations to affect the cost query's sensitivity)."""
    top = float(model.c[:model.n_gen].max())
    if include_psi:
        top = max(top, model.psi)
    return top


def obfuscate_cost(model: CompactModel, d: np.ndarray, alpha: float,
                   c_bar: float, eps2: Fraction, rng: np.random.Generator,
                   ledger: Ledger | None = None) -> tuple[float, LedgerEntry]:
    """Noisy dispatch cost: C(d) + Laplace(alpha*c_bar/eps2). May come out
    negative; consumers must not assume positivity."""
    if eps2 <= 0:
        raise ValueError("eps2 must be positive")
    res = solve_opf(model, np.asarray(d, dtype=float))
    if not res.feasible:
        raise ValueError(f"cost query on undispatchable loads: {res.certificate}")
    scale = alpha * c_bar / float(eps2)
    noisy = float(res.cost + laplace(scale, 1, rng)[0])
    entry = LedgerEntry(query="cost_obfuscation", sensitivity=alpha * c_bar,
                        noise_scale=scale, eps=Fraction(eps2))
    if ledger is not None:
        ledger.entries.append(entry)
    return noisy, entry


def noisy_max_rows(model: CompactModel, d: np.ndarray, delta: AttackSet,
                   tau: int, alpha: float, c_bar: float, eps3: Fraction,
                   rng_seed: RngSeed,
                   ledger: Ledger | None = None,
                   stream_key: tuple[int, ...] = (2,)
                   ) -> tuple[list[int], list[LedgerEntry]]:
    """Select tau constraints by report-noisy-max.

    Each round scores every remaining load-coupled row by the hardened
    dispatch cost with that row added to the selection, plus
    Laplace(alpha*c_bar/eps3) noise (sensitivity alpha*c_bar, fresh noise
    per (round, candidate) substream), and keeps the argmax (ties to the
    lowest row index). Every round charges eps3, including rounds where the
    candidate pool is already exhausted, so the accounting identity holds
    for the declared tau.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1")
    if eps3 <= 0:
        raise ValueError("eps3 must be positive")
    d = np.asarray(d, dtype=float)
    sensitivity = alpha * c_bar
    scale = sensitivity / float(eps3)
    candidates = attackable_rows(model)
    chosen: list[int] = []
    entries: list[LedgerEntry] = []
    for t in range(tau):
        pool = [k for k in candidates if k not in chosen]
        best_row = None
        best_score = -math.inf
        for k in pool:
            value = ro_attack_reduced(model, d, delta, set(chosen) | {k}).cost
            noise = laplace(scale, 1, rng_seed.stream(*stream_key, t, k))[0]
            score = value + noise
            if score > best_score:  # strict: ties keep the lowest row index
                best_score = score
                best_row = k
        if best_row is not None:
            chosen.append(best_row)
        entry = LedgerEntry(query=f"constraint_selection[{t}]",
                            sensitivity=sensitivity, noise_scale=scale,
                            eps=Fraction(eps3))
        entries.append(entry)
        if ledger is not None:
            ledger.entries.append(entry)
    return chosen, entries
