"""Explicit finite differences for the regularised, uniformly parabolic flow.

The sign functions are replaced by clamp((p -+ 1)/eps), whose primitive W_eps
sits between |p+1|+|p-1| and |p+1|+|p-1| + 2*eps.  The explicit conservative
update is monotone for dt <= eps*dx^2/4, which is what the comparison tests
rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NumericalDefect, ValidationError
from .profile import BCKind, BoundaryCondition, Profile, check, evaluate_many

_KIND = {BCKind.DIRICHLET: 0, BCKind.NEUMANN: 1, BCKind.PERIODIC: 2}
QUIET = 1e-6


@njit(cache=True, inline="always")
def _clamp(v):
    if v > 1.0:
        return 1.0
    if v < -1.0:
        return -1.0
    return v


@njit(cache=True, inline="always")
def _w(q, eps):
    a = abs(q)
    if a <= eps:
        return q * q / (2.0 * eps)
    return a - 0.5 * eps


@njit(cache=True)
def _l_eps(p, eps):
    return _clamp((p + 1.0) / eps) + _clamp((p - 1.0) / eps)


@njit(cache=True)
def _w_eps(p, eps):
    return _w(p + 1.0, eps) + _w(p - 1.0, eps) + eps


@njit(cache=True)
def _energy(u, dx, eps, kind):
    n = u.size
    tot = 0.0
    for i in range(n - 1):
        tot += _w_eps((u[i + 1] - u[i]) / dx, eps)
    if kind == 2:
        tot += _w_eps((u[0] - u[n - 1]) / dx, eps)
    return tot * dx


@njit(cache=True)
def _run(u, nsteps, dt, dx, eps, kind, A, B, t0, stats):
    """Advance u in place by nsteps steps of size dt.

    stats: [dissipation, energy, largest energy increase, t_quiet, last max|u_t|];
    t_quiet < 0 means no quiet step yet.  The energy of each new state is
    accumulated during the next flux pass, so one extra pass closes the run.
    Returns the number of steps done.
    """
    n = u.size
    m = n if kind == 2 else n - 1
    flux = np.empty(m)
    inv_dx = 1.0 / dx
    e_prev = stats[1]
    for step in range(nsteps):
        e = 0.0
        for i in range(m):
            j = i + 1 if i < n - 1 else 0
            g = (u[j] - u[i]) * inv_dx
            flux[i] = _l_eps(g, eps)
            e += _w_eps(g, eps)
        e *= dx
        if step > 0:
            if not math.isfinite(e):
                stats[1] = e
                return step
            if e - e_prev > stats[2]:
                stats[2] = e - e_prev
            e_prev = e
        ut_max = 0.0
        diss = 0.0
        lo = 1 if kind == 0 else 0
        hi = n - 1 if kind == 0 else n
        for i in range(lo, hi):
            if kind == 2:
                left = flux[i - 1] if i > 0 else flux[n - 1]
                right = flux[i]
            else:
                left = flux[i - 1] if i > 0 else 0.0
                right = flux[i] if i < n - 1 else 0.0
            ut = (right - left) * inv_dx
            u[i] += dt * ut
            diss += ut * ut
            if abs(ut) > ut_max:
                ut_max = abs(ut)
        stats[0] += dt * diss * dx
        stats[4] = ut_max
        if stats[3] < 0.0 and ut_max < QUIET:
            stats[3] = t0 + step * dt
    if nsteps > 0:
        e = _energy(u, dx, eps, kind)
        if not math.isfinite(e):
            stats[1] = e
            return nsteps - 1
        if e - e_prev > stats[2]:
            stats[2] = e - e_prev
        stats[1] = e
    return nsteps


def l_eps(p, epsilon: float):
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    p = np.asarray(p, dtype=float)
    return np.clip((p + 1.0) / epsilon, -1.0, 1.0) + np.clip((p - 1.0) / epsilon, -1.0, 1.0)


def w_eps(p, epsilon: float):
    """Primitive of l_eps, shifted so that W <= w_eps <= W + 2*epsilon."""
    p = np.asarray(p, dtype=float)

    def w(q):
        a = np.abs(q)
        return np.where(a <= epsilon, q * q / (2.0 * epsilon), a - 0.5 * epsilon)

    return w(p + 1.0) + w(p - 1.0) + epsilon


@dataclass(frozen=True)
class FDConfig:
    epsilon: float
    dx: float
    t_end: float
    bc: BoundaryCondition | None = None
    dt: float | None = None

    def resolved_dt(self) -> float:
        return 0.25 * self.epsilon * self.dx ** 2 if self.dt is None else self.dt

    def validate(self) -> None:
        bad = []
        if not self.epsilon > 0:
            bad.append("epsilon must be positive")
        if not self.dx > 0:
            bad.append("dx must be positive")
        if not self.t_end >= 0:
            bad.append("t_end must be nonnegative")
        if self.dt is not None and self.dt > 0.25 * self.epsilon * self.dx ** 2 * (1 + 1e-12):
            bad.append("dt exceeds the explicit stability limit eps*dx^2/4")
        if self.dt is not None and not self.dt > 0:
            bad.append("dt must be positive")
        if bad:
            raise ValidationError(bad)


@dataclass
class FDTrajectory:
    grid: np.ndarray
    frames: list[tuple[float, np.ndarray]]
    dissipation: list[float]
    energy: list[float]
    config: FDConfig
    dt: float
    steps: int
    energy_increase_max: float
    t_quiet: float | None
    bc: BoundaryCondition = field(default=None)

    def frame(self, t: float) -> np.ndarray:
        for s, u in self.frames:
            if abs(s - t) <= 1e-12 * max(1.0, abs(t)):
                return u
        raise KeyError(f"no frame at t={t}")


def make_grid(p: Profile, dx: float) -> tuple[np.ndarray, float]:
    """Uniform grid on [a, b]; dx is adjusted to divide the domain."""
    L = p.b - p.a
    N = max(2, int(round(L / dx)))
    h = L / N
    if p.bc.kind is BCKind.PERIODIC:
        return p.a + h * np.arange(N), h
    return p.a + h * np.arange(N + 1), h


def sample(p: Profile, x: np.ndarray) -> np.ndarray:
    u = evaluate_many(p, x, side="right")
    if p.bc.kind is BCKind.DIRICHLET:
        u[0], u[-1] = p.bc.A, p.bc.B
    return u


def solve_fd(p0: Profile, cfg: FDConfig, frame_times=None) -> FDTrajectory:
    """Run the explicit scheme to cfg.t_end.

    Every step is stored when frame_times is None; otherwise only t=0, the
    requested times and t_end are kept (long runs cannot hold every step).
    """
    cfg.validate()
    p0 = check(p0)
    bc = cfg.bc or p0.bc
    if bc != p0.bc:
        p0 = Profile(p0.domain, p0.breakpoints, bc)
    x, dx = make_grid(p0, cfg.dx)
    dt = cfg.dt if cfg.dt is not None else 0.25 * cfg.epsilon * dx ** 2
    if dt > 0.25 * cfg.epsilon * dx ** 2 * (1 + 1e-12):
        raise ValidationError(["dt exceeds the explicit stability limit on the adjusted grid"])
    kind = _KIND[bc.kind]
    u = sample(p0, x).astype(float)
    e0 = float(_energy(u, dx, cfg.epsilon, kind))
    stats = np.array([0.0, e0, -math.inf, -1.0, 0.0])
    frames = [(0.0, u.copy())]
    diss = [0.0]
    ens = [e0]
    T = cfg.t_end
    if frame_times is None:
        nst = int(math.ceil(T / dt - 1e-9)) if T > 0 else 0
        stops = [min((k + 1) * dt, T) for k in range(nst)]
    else:
        stops = sorted({float(t) for t in frame_times if 0 < t <= T} | ({T} if T > 0 else set()))
    t = 0.0
    steps = 0
    for ts in stops:
        span = ts - t
        k = int(math.floor(span / dt * (1 + 1e-12)))
        done = _run(u, k, dt, dx, cfg.epsilon, kind, bc.A, bc.B, t, stats)
        steps += done
        if done < k or not np.all(np.isfinite(u)):
            raise NumericalDefect(f"non-finite values at frame {len(frames)} (step {steps})")
        t += k * dt
        rem = ts - t
        if rem > 1e-15 * max(1.0, ts):
            _run(u, 1, rem, dx, cfg.epsilon, kind, bc.A, bc.B, t, stats)
            steps += 1
        t = ts
        frames.append((ts, u.copy()))
        diss.append(float(stats[0]))
        ens.append(float(stats[1]))
    tq = float(stats[3]) if stats[3] >= 0 else None
    return FDTrajectory(x, frames, diss, ens, cfg, dt, steps, float(stats[2]), tq, bc)


def compare(tr, fd: FDTrajectory, times) -> list[dict]:
    """Sup-norm and discrete L2 errors between exact snapshots and FD frames."""
    rows = []
    dx = fd.grid[1] - fd.grid[0]
    for t in times:
        try:
            p = tr.at(t)
        except KeyError:
            raise ValueError(f"time {t} not among the exact snapshots") from None
        try:
            u = fd.frame(t)
        except KeyError:
            raise ValueError(f"time {t} not among the FD frames") from None
        uL = evaluate_many(p, fd.grid, side="left")
        uR = evaluate_many(p, fd.grid, side="right")
        ref = 0.5 * (uL + uR)
        err = np.abs(u - ref)
        if fd.bc is not None and fd.bc.kind is BCKind.DIRICHLET:
            err[0] = err[-1] = 0.0
        rows.append({"t": t, "sup": float(err.max()), "l2": float(math.sqrt(np.sum(err ** 2) * dx))})
    return rows


def refinement_study(tr, p0: Profile, ladder, times, t_end: float | None = None) -> list[dict]:
    """Errors for each (epsilon, dx) rung with the observed order between rungs."""
    times = list(times)
    T = t_end if t_end is not None else max(times)
    out = []
    prev = None
    for eps, dx in ladder:
        fd = solve_fd(p0, FDConfig(eps, dx, T), frame_times=times)
        rows = compare(tr, fd, times)
        worst = max(r["sup"] for r in rows)
        order = None
        if prev is not None and worst > 0 and prev > 0:
            order = math.log2(prev / worst)
        out.append({"epsilon": eps, "dx": dx, "sup": worst, "l2": max(r["l2"] for r in rows),
                    "order": order, "t_quiet": fd.t_quiet})
        prev = worst
    return out
