"""Named example profiles."""

from __future__ import annotations

import math

import numpy as np

from .profile import BCKind, BoundaryCondition, Profile


def tent_up(d: float = 2.0) -> Profile:
    """u = d - |x| on (-1, 1) with zero Dirichlet data; needs d >= 1."""
    if d < 1:
        raise ValueError("tent-up needs d >= 1")
    return Profile.from_points([-1.0, 0.0, 1.0], [d - 1.0, d, d - 1.0], BoundaryCondition.dirichlet(0, 0))


def tent_down(e: float = 0.0) -> Profile:
    """u = e - |x| on (-1, 1) with zero Dirichlet data; needs e <= 1."""
    if e > 1:
        raise ValueError("tent-down needs e <= 1")
    return Profile.from_points([-1.0, 0.0, 1.0], [e - 1.0, e, e - 1.0], BoundaryCondition.dirichlet(0, 0))


def oscillating(n: int = 5, per_hump: int = 16, bc: BoundaryCondition | None = None) -> Profile:
    """x^2 sin(1/x) on (-1, 1), flattened to 0 for |x| <= 1/(n pi), sampled linearly.

    Nodes sit on every zero 1/(k pi) and per_hump points subdivide each hump
    uniformly in 1/x, so extrema are resolved equally on every scale.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    bc = bc or BoundaryCondition.dirichlet(0, 0)
    # 1/x runs from 1 (x = 1) to n*pi (x = 1/(n pi))
    knots = [1.0] + [k * math.pi for k in range(1, n + 1)]
    ys = []
    for lo, hi in zip(knots, knots[1:]):
        ys.extend(np.linspace(lo, hi, per_hump + 1)[:-1])
    ys.append(n * math.pi)
    xr = np.sort(1.0 / np.array(ys))
    xr[-1] = 1.0
    f = lambda x: x * x * np.sin(1.0 / x)
    ur = f(xr)
    ur[0] = 0.0  # x = 1/(n pi) is a zero
    xs = np.concatenate([-xr[::-1], xr])
    us = np.concatenate([-ur[::-1], ur])
    # the flat part [-1/(n pi), 1/(n pi)] joins the two inner zeros
    return Profile.from_points(list(xs), list(us), bc)


def random_profile(seed: int, n_breaks: int = 8, bc_kind: str = "dirichlet",
                   slope_range: float = 3.0, jump_prob: float = 0.0) -> Profile:
    """Random continuous (or jumpy) piecewise-linear profile on (0, 1)."""
    rng = np.random.default_rng(seed)
    k = max(2, int(n_breaks))
    xs = np.unique(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, k - 2)]))
    sl = rng.uniform(-slope_range, slope_range, len(xs) - 1)
    us = np.concatenate([[0.0], np.cumsum(sl * np.diff(xs))])
    kind = BCKind(bc_kind)
    if kind is BCKind.PERIODIC:
        us = us - xs * us[-1]
    jumps = {}
    for i in range(1, len(xs) - 1):
        if rng.uniform() < jump_prob:
            jumps[i] = float(us[i] + rng.uniform(-1, 1))
            us[i + 1:] += jumps[i] - us[i]
    if kind is BCKind.PERIODIC and jumps:
        us[-1] = us[0]
    if kind is BCKind.DIRICHLET:
        bc = BoundaryCondition.dirichlet(float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)))
    elif kind is BCKind.NEUMANN:
        bc = BoundaryCondition.neumann()
    else:
        bc = BoundaryCondition.periodic()
    return Profile.from_points(list(map(float, xs)), list(map(float, us)), bc, jumps)
