"""Shared fixtures: small hand-derivable grids and bundled testbeds."""

import numpy as np
import pytest

from gridsynth.case_io import compute_ptdf, load_case, parse_case
from gridsynth.compact import PenaltyConfig, build_compact

# Two buses, one line (cap 200 MW), one generator at bus 1 (10 $/MWh,
# 400 MW). Bus 2 is the declared reference, so the PTDF is [[1, 0]].
CASE2_TEXT = """\
function mpc = case2
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
\t1\t2\t0\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
\t2\t3\t100\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t0\t0\t0\t0\t1\t100\t1\t400\t0;
];
mpc.branch = [
\t1\t2\t0\t0.1\t0\t200\t0\t0\t0\t0\t1;
];
mpc.gencost = [
\t2\t0\t0\t2\t10\t0;
];
"""

# Equal-reactance triangle, slack at bus 3. Cheap generation at bus 1,
# expensive at bus 3, line 1-3 capped at 120 MW. Hand solution at nominal
# loads (100, 150): p1 = 230, p3 = 20, cost 2900; the worst eta=10% attack
# moves 10 MW of load from bus 2 to bus 3 for a cost of 3000.
CASE3_TEXT = """\
function mpc = case3
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
\t1\t2\t0\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
\t2\t1\t100\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
\t3\t3\t150\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t0\t0\t0\t0\t1\t100\t1\t500\t0;
\t3\t0\t0\t0\t0\t1\t100\t1\t500\t0;
];
mpc.branch = [
\t1\t2\t0\t0.1\t0\t0\t0\t0\t0\t0\t1;
\t2\t3\t0\t0.1\t0\t0\t0\t0\t0\t0\t1;
\t1\t3\t0\t0.1\t0\t120\t0\t0\t0\t0\t1;
];
mpc.gencost = [
\t2\t0\t0\t2\t10\t0;
\t2\t0\t0\t2\t30\t0;
];
"""

# Diamond with four load buses; used as the brute-force oracle target.
CASE4_TEXT = """\
function mpc = case4
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t50\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
\t2\t1\t100\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
\t3\t1\t120\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
\t4\t2\t80\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t0\t0\t0\t0\t1\t100\t1\t1000\t0;
\t4\t0\t0\t0\t0\t1\t100\t1\t1000\t0;
];
mpc.branch = [
\t1\t2\t0\t0.1\t0\t90\t0\t0\t0\t0\t1;
\t2\t4\t0\t0.1\t0\t0\t0\t0\t0\t0\t1;
\t1\t3\t0\t0.1\t0\t0\t0\t0\t0\t0\t1;
\t3\t4\t0\t0.1\t0\t70\t0\t0\t0\t0\t1;
\t2\t3\t0\t0.2\t0\t0\t0\t0\t0\t0\t1;
];
mpc.gencost = [
\t2\t0\t0\t2\t10\t0;
\t2\t0\t0\t2\t50\t0;
];
"""


def _bundle(case):
    F = compute_ptdf(case)
    model = build_compact(case, F)
    return case, F, model


@pytest.fixture(scope="session")
def grid2():
    return _bundle(parse_case(CASE2_TEXT))


@pytest.fixture(scope="session")
def grid3():
    return _bundle(parse_case(CASE3_TEXT))


@pytest.fixture(scope="session")
def grid4():
    return _bundle(parse_case(CASE4_TEXT))


@pytest.fixture(scope="session")
def grid5():
    return _bundle(load_case("pjm5"))


@pytest.fixture(scope="session")
def grid14():
    return _bundle(load_case("ieee14"))


def random_feasible_loads(case, rng, scale=1.0):
    """Random nonnegative loads that keep total demand dispatchable."""
    d0 = case.load_vector()
    cap = sum(g.p_max for g in case.generators)
    d = np.maximum(0.0, d0 * rng.uniform(0.3, 1.3 * scale, size=len(d0)))
    total = d.sum()
    if total > 0.95 * cap:
        d *= 0.95 * cap / total
    return d
