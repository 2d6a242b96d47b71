import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from facetflow.profile import BoundaryCondition, Profile

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=600,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def build(xs, slopes, bc, jumps=None, u0=0.0) -> Profile:
    """Profile from breakpoints, segment slopes and optional {index: jump size}."""
    jumps = jumps or {}
    bps = []
    u = u0
    for i, x in enumerate(xs):
        if i > 0:
            u += slopes[i - 1] * (xs[i] - xs[i - 1])
        uL = u
        if i in jumps:
            u += jumps[i]
        bps.append((x, uL, u))
    return Profile((xs[0], xs[-1]), tuple(bps), bc)


def random_pl(rng: np.random.Generator, kind: str, n_max: int = 12, slope: float = 3.0,
              jump_prob: float = 0.0, data: tuple[float, float] | None = None) -> Profile:
    """Random piecewise-linear profile on (0, 1) with at most n_max breakpoints."""
    n = int(rng.integers(2, n_max + 1))
    xs = np.unique(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, n - 2)]))
    xs = [float(x) for x in xs]
    sl = [float(s) for s in rng.uniform(-slope, slope, len(xs) - 1)]
    jumps = {i: float(rng.uniform(-1, 1)) for i in range(1, len(xs) - 1) if rng.uniform() < jump_prob}
    if kind == "periodic":
        total = sum(s * (b - a) for s, a, b in zip(sl, xs, xs[1:])) + sum(jumps.values())
        # close the loop with the last segment
        last = xs[-1] - xs[-2]
        sl[-1] -= total / last
        bc = BoundaryCondition.periodic()
    elif kind == "neumann":
        bc = BoundaryCondition.neumann()
    else:
        A, B = data if data is not None else (float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)))
        bc = BoundaryCondition.dirichlet(A, B)
    p = build(xs, sl, bc, jumps, u0=float(rng.uniform(-0.5, 0.5)))
    if kind == "periodic":
        bps = list(p.breakpoints)
        x, uL, _ = bps[-1]
        bps[-1] = (x, bps[0][1], bps[0][1])
        bps[0] = (bps[0][0], bps[0][1], bps[0][1])
        p = Profile(p.domain, tuple(bps), bc)
    return p


@st.composite
def profiles(draw, kinds=("dirichlet", "neumann", "periodic"), jump_prob=0.0, n_max=8):
    seed = draw(st.integers(0, 2**31 - 1))
    kind = draw(st.sampled_from(kinds))
    return random_pl(np.random.default_rng(seed), kind, n_max=n_max, jump_prob=jump_prob)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
