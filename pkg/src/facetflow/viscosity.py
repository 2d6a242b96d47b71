"""The nonlocal slope operator: band-constrained Dirichlet minimisers on an interval.

For an interval J, a centre Z and band width Delta, zeta minimises the Dirichlet
energy among functions with Z - Delta/2 <= zeta <= Z + Delta/2, taking the value
Z - chi_l*Delta/2 at the left end and Z + chi_r*Delta/2 at the right end.  The
operator value is zeta'.  For constant Z the minimiser is the chord, with slope
(chi_l + chi_r)/|J| when Delta = 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy.optimize import lsq_linear

from .errors import NumericalDefect, ValidationError


def lambda_affine(p: int, chi_l: int, chi_r: int, length: float) -> float:
    """Slope of the chord from p - chi_l to p + chi_r over an interval of this length."""
    if not length > 0:
        raise ValueError("length must be positive")
    return (chi_l + chi_r) / length


@dataclass(frozen=True)
class ObstacleProblem:
    alpha: float
    beta: float
    Z: Callable[[np.ndarray], np.ndarray]
    chi_l: int
    chi_r: int
    Delta: float = 2.0

    def __post_init__(self):
        bad = []
        if not self.beta > self.alpha:
            bad.append("empty interval")
        if not self.Delta > 0:
            bad.append("band width must be positive")
        if self.chi_l not in (-1, 1) or self.chi_r not in (-1, 1):
            bad.append("selectors must be +1 or -1")
        if bad:
            raise ValidationError(bad)

    def discretise(self, n_grid: int):
        x = np.linspace(self.alpha, self.beta, n_grid)
        z = np.asarray(self.Z(x), dtype=float) * np.ones_like(x)
        half = 0.5 * self.Delta
        lo, hi = z - half, z + half
        left = z[0] - self.chi_l * half
        right = z[-1] + self.chi_r * half
        return x, lo, hi, left, right


@dataclass
class LambdaResult:
    x: np.ndarray
    zeta: np.ndarray
    lam: np.ndarray  # one-sided difference quotients, len(x) - 1
    sweeps: int
    residual: float

    def slope_at(self, x: float) -> float:
        k = int(np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, len(self.lam) - 1))
        return float(self.lam[k])


@njit(cache=True)
def _psor(zeta, lo, hi, omega, tol, max_sweeps):
    n = zeta.size
    for sweep in range(max_sweeps):
        for i in range(1, n - 1):
            target = 0.5 * (zeta[i - 1] + zeta[i + 1])
            v = zeta[i] + omega * (target - zeta[i])
            if v < lo[i]:
                v = lo[i]
            elif v > hi[i]:
                v = hi[i]
            zeta[i] = v
        # projected residual
        res = 0.0
        for i in range(1, n - 1):
            t = 0.5 * (zeta[i - 1] + zeta[i + 1])
            if t < lo[i]:
                t = lo[i]
            elif t > hi[i]:
                t = hi[i]
            r = abs(zeta[i] - t)
            if r > res:
                res = r
        if res < tol:
            return sweep + 1, res
    return max_sweeps, res


def solve_obstacle(prob: ObstacleProblem, n_grid: int = 201, *, tol: float = 1e-10,
                   max_sweeps: int = 2_000_000, init: np.ndarray | None = None) -> LambdaResult:
    """Projected over-relaxed Gauss-Seidel on the band-constrained Dirichlet energy."""
    if n_grid < 3:
        raise ValidationError(["n_grid must be at least 3"])
    x, lo, hi, left, right = prob.discretise(n_grid)
    if init is None:
        zeta = np.clip(np.linspace(left, right, n_grid), lo, hi)
    else:
        zeta = np.clip(np.asarray(init, dtype=float).copy(), lo, hi)
    zeta[0], zeta[-1] = left, right
    omega = 2.0 / (1.0 + math.sin(math.pi / (n_grid - 1)))
    # the residual is measured in value units; scale to the band
    sweeps, res = _psor(zeta, lo, hi, omega, tol * 1e-2, max_sweeps)
    if res >= tol:
        raise NumericalDefect(f"obstacle solver did not converge: residual {res:.3e}")
    lam = np.diff(zeta) / np.diff(x)
    return LambdaResult(x, zeta, lam, sweeps, float(res))


def solve_obstacle_qp(prob: ObstacleProblem, n_grid: int = 201) -> LambdaResult:
    """Dense bounded least-squares solve of the same discrete problem."""
    x, lo, hi, left, right = prob.discretise(n_grid)
    m = n_grid - 2
    h = np.diff(x)
    D = np.zeros((n_grid - 1, m))
    rhs = np.zeros(n_grid - 1)
    for k in range(n_grid - 1):
        w = 1.0 / math.sqrt(h[k])
        # row k is (zeta[k+1] - zeta[k]) / sqrt(h)
        if k + 1 <= m:
            D[k, k] += w
        else:
            rhs[k] -= w * right
        if k >= 1:
            D[k, k - 1] -= w
        else:
            rhs[k] += w * left
    sol = lsq_linear(D, rhs, bounds=(lo[1:-1], hi[1:-1]), method="bvls", tol=1e-15, lsmr_tol="auto")
    zeta = np.concatenate([[left], sol.x, [right]])
    return LambdaResult(x, zeta, np.diff(zeta) / h, int(sol.nit), float(sol.optimality))


def _lam(I: tuple[float, float], chi_l: int, chi_r: int, x: float, n_grid: int) -> tuple[float, float]:
    prob = ObstacleProblem(I[0], I[1], lambda s: np.ones_like(s), chi_l, chi_r)
    res = solve_obstacle(prob, n_grid)
    return res.slope_at(x), lambda_affine(1, chi_l, chi_r, I[1] - I[0])


def check_comparison(I1: tuple[float, float], I2: tuple[float, float], x: float,
                     n_grid: int = 51) -> dict:
    """Evaluate the monotonicity inequalities of the operator in the interval.

    Nested case (I2 inside I1): L--(I2) <= L(s,t)(I1) <= L++(I2) for all selectors.
    Overlap case (I1 starts left of I2): L(s,-)(I1) <= L(+,t)(I2).
    Each entry reports both sides (discrete solver) and the slack.
    """
    a1, b1 = I1
    a2, b2 = I2
    if not (a1 < b1 and a2 < b2):
        raise ValidationError(["intervals must be nonempty"])
    rows = []
    if a1 <= a2 and b2 <= b1:
        case = "nested"
        if not a2 <= x <= b2:
            raise ValidationError(["x must lie in the inner interval"])
        lmm, _ = _lam(I2, -1, -1, x, n_grid)
        lpp, _ = _lam(I2, 1, 1, x, n_grid)
        for sl in (-1, 1):
            for sr in (-1, 1):
                v, va = _lam(I1, sl, sr, x, n_grid)
                rows.append({"lhs": f"L--(I2)", "rhs": f"L{_s(sl)}{_s(sr)}(I1)", "lhs_value": lmm,
                             "rhs_value": v, "slack": v - lmm, "affine_rhs": va})
                rows.append({"lhs": f"L{_s(sl)}{_s(sr)}(I1)", "rhs": "L++(I2)", "lhs_value": v,
                             "rhs_value": lpp, "slack": lpp - v, "affine_lhs": va})
    elif a1 <= a2 < b1 <= b2:
        case = "overlap"
        if not a2 <= x <= b1:
            raise ValidationError(["x must lie in the overlap"])
        for sl in (-1, 1):
            for sr in (-1, 1):
                v1, _ = _lam(I1, sl, -1, x, n_grid)
                v2, _ = _lam(I2, 1, sr, x, n_grid)
                rows.append({"lhs": f"L{_s(sl)}-(I1)", "rhs": f"L+{_s(sr)}(I2)", "lhs_value": v1,
                             "rhs_value": v2, "slack": v2 - v1})
    else:
        raise ValidationError(["intervals are neither nested nor overlapping left-to-right"])
    return {"case": case, "x": x, "rows": rows, "all_hold": all(r["slack"] >= -1e-9 for r in rows),
            "min_slack": min(r["slack"] for r in rows)}


def _s(v: int) -> str:
    return "+" if v > 0 else "-"
