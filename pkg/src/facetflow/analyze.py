"""Extinction-time estimates, steady-state classification and trajectory series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .evolve import Engine, Trajectory
from .profile import BCKind, Profile, check, energy

TOL = 1e-12


@dataclass
class PairBound:
    x1: float
    x2: float
    lam: float
    d: float
    bound: float

    def to_dict(self) -> dict:
        return {"x1": self.x1, "x2": self.x2, "lambda": self.lam, "d": self.d, "bound": self.bound}


@dataclass
class ExtinctionEstimate:
    bound: float
    pair_bounds: list[PairBound] = field(default_factory=list)
    group_trace: list[str] = field(default_factory=list)
    delta: float = 0.0
    energy_bound: float = math.inf

    def to_dict(self) -> dict:
        return {"bound": self.bound, "delta": self.delta, "energy_bound": self.energy_bound,
                "pair_bounds": [p.to_dict() for p in self.pair_bounds],
                "group_trace": list(self.group_trace)}


@dataclass(frozen=True)
class _Piece:
    xl: float
    xr: float
    s: float
    c: float
    kappa: float
    original: bool


def _extended_pieces(eng: Engine) -> tuple[list[_Piece], float]:
    """Pieces of the state continued past the walls by the symmetry of the bc.

    Dirichlet walls use the odd reflection about (wall, datum), Neumann walls
    the even one, periodic states repeat.  Three copies of the domain.
    """
    ch = eng.chain
    kap = {j: f.kappa for j, f in eng.infos.items()}
    base = [(ch.left_x(j), ch.right_x(j), ch.s[j], ch.c[j], kap.get(j, 0.0)) for j in range(ch.n)]
    a, b, P = ch.a, ch.b, ch.P
    out: list[_Piece] = []
    if ch.periodic:
        for k in (-1, 0, 1):
            for xl, xr, s, c, kp in base:
                out.append(_Piece(xl + k * P, xr + k * P, s, c - s * k * P, kp, k == 0))
        return out, 3 * P
    A, B = ch.bc.A, ch.bc.B
    odd = ch.bc.kind is BCKind.DIRICHLET

    def mirror(piece, w, datum):
        xl, xr, s, c, kp = piece
        if odd:
            return _Piece(2 * w - xr, 2 * w - xl, s, 2 * datum - 2 * s * w - c, -kp, False)
        return _Piece(2 * w - xr, 2 * w - xl, -s, 2 * s * w + c, kp, False)

    left = [mirror(pc, a, A) for pc in reversed(base)]
    right = [mirror(pc, b, B) for pc in reversed(base)]
    mid = [_Piece(*pc, True) for pc in base]
    return left + mid + right, 3 * P


def _cross(p: int, c_group: float, c_other: float) -> float:
    """x where the slope-p line with intercept c_group meets the slope -p line."""
    return (c_other - c_group) / (2.0 * p)


def _group_bound(group: list[int], pieces: list[_Piece], cap: float, trace: list[str],
                 pairs: list[PairBound]) -> float:
    p = int(pieces[group[0]].s)
    i0, i1 = group[0], group[-1]
    # nearest opposite-slope pieces on either side
    lo = next((k for k in range(i0 - 1, -1, -1) if pieces[k].s == -p), None)
    hi = next((k for k in range(i1 + 1, len(pieces)) if pieces[k].s == -p), None)
    members = list(group)
    total = 0.0
    while len(members) >= 2:
        cs = [pieces[k].c for k in members]
        best = (-1.0, 0, 0)
        for r in range(len(members)):
            for s in range(r + 1, len(members)):
                gap = abs(cs[r] - cs[s])
                if gap > best[0] + TOL * max(1.0, abs(gap)):
                    best = (gap, r, s)
        d, r, s = best
        cmin, cmax = min(cs), max(cs)
        if lo is not None and hi is not None:
            c0, c3 = pieces[lo].c, pieces[hi].c
            xs_lo = [_cross(p, c, c0) for c in (cmin, cmax)]
            xs_hi = [_cross(p, c, c3) for c in (cmin, cmax)]
            lam = max(xs_hi) - min(xs_lo)
            lam = min(max(lam, 0.0), cap)
        else:
            lam = cap
        lengths = sum(pieces[k].xr - pieces[k].xl for k in members)
        lam = max(lam, lengths)
        inner = [q for q in range(len(members)) if cmin + TOL < cs[q] < cmax - TOL]
        if inner:
            j = inner[0]
            nb = j + 1 if j + 1 < len(members) else j - 1
            dj = abs(cs[j] - cs[nb])
            pair = (members[min(j, nb)], members[max(j, nb)])
            trace.append(f"flatten facets at x={pieces[pair[0]].xl:.6g},{pieces[pair[1]].xl:.6g} "
                         f"(inside strip of {d:.6g})")
            kill = {members[j], members[nb]}
            use_d = dj
        else:
            pair = (members[r], members[s])
            trace.append(f"collapse {len(members)} facets onto strip of width {d:.6g}")
            kill = set(members)
            use_d = d
        bd = lam * use_d / 4.0
        pairs.append(PairBound(pieces[pair[0]].xl, pieces[pair[1]].xl, lam, use_d, bd))
        total += bd
        members = [k for k in members if k not in kill]
    if members:
        trace.append(f"unpaired facet at x={pieces[members[0]].xl:.6g} left to its neighbours")
    return total


def _energy_bound(p: Profile) -> float:
    """Dissipation >= 4/(b-a) while anything moves; energy cannot drop below its floor."""
    e = energy(p).total
    L = p.b - p.a
    floor = 2.0 * L
    if p.bc.kind is BCKind.DIRICHLET:
        floor = 2.0 * max(L, abs(p.bc.B - p.bc.A))
    return max(e - floor, 0.0) * L / 4.0


def extinction_bound(p: Profile, delta: float | None = None) -> ExtinctionEstimate:
    """Upper estimate of the extinction time from colliding same-slope facets."""
    p = check(p)
    eng = Engine(p)
    est = ExtinctionEstimate(0.0, energy_bound=_energy_bound(p))
    if eng.extinct:
        est.group_trace.append("no facet with nonzero curvature")
        return est
    if delta is None:
        # depends only on translation-invariant sizes, so the bound is too
        L = p.b - p.a
        vals = [v for q in p.breakpoints for v in (q.u_left, q.u_right)]
        if p.bc.kind is BCKind.DIRICHLET:
            vals += [p.bc.A, p.bc.B]
        delta = 1e-9 * L * max(L, max(vals) - min(vals))
    while not eng.extinct and eng.t < delta:
        eng.step(t_limit=delta)
    est.delta = eng.t
    if eng.extinct:
        est.bound = eng.t
        est.group_trace.append("extinct within the initial micro-step")
        return est
    pieces, cap = _extended_pieces(eng)
    moving = [k for k, pc in enumerate(pieces) if pc.kappa != 0 and abs(pc.s) == 1.0]
    groups: list[list[int]] = []
    for k in moving:
        if groups and pieces[groups[-1][-1]].s == pieces[k].s:
            groups[-1].append(k)
        else:
            groups.append([k])
    best = 0.0
    for g in groups:
        if not any(pieces[k].original for k in g):
            continue
        est.group_trace.append(f"group p={int(pieces[g[0]].s):+d} with {len(g)} facets")
        best = max(best, _group_bound(g, pieces, cap, est.group_trace, est.pair_bounds))
    est.bound = eng.t + best
    return est


# steady states ------------------------------------------------------------------

@dataclass(frozen=True)
class SteadyVerdict:
    steady: bool
    omega_constant: float | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {"steady": self.steady, "omega_constant": self.omega_constant, "reason": self.reason}


def classify_steady(p: Profile) -> SteadyVerdict:
    """Decide from the data alone whether the flow leaves p unchanged."""
    p = check(p)
    s = p.slopes
    tol = TOL * max(1.0, p.value_scale())
    jumps = p.jumps()
    kind = p.bc.kind
    if kind in (BCKind.NEUMANN, BCKind.PERIODIC):
        if jumps:
            return SteadyVerdict(False, reason="profile has a jump")
        if np.any(np.abs(s) > 1.0):
            return SteadyVerdict(False, reason="a slope exceeds 1 in absolute value")
        return SteadyVerdict(True, 0.0)
    A, B = p.bc.A, p.bc.B
    a, b = p.a, p.b
    if A > B:
        # mirror u -> -u
        flip = Profile(p.domain, tuple((q.x, -q.u_left, -q.u_right) for q in p.breakpoints),
                       type(p.bc).dirichlet(-A, -B))
        v = classify_steady(flip)
        return SteadyVerdict(v.steady, None if v.omega_constant is None else -v.omega_constant, v.reason)
    g = (B - A) / (b - a)
    gl, gr = p.trace_left(), p.trace_right()
    if abs(g - 1.0) <= TOL:
        ok = not jumps and all(
            abs(q.u_left - (q.x + A - a)) <= tol and abs(q.u_right - (q.x + A - a)) <= tol
            for q in p.breakpoints)
        return SteadyVerdict(True, 1.0) if ok else SteadyVerdict(False, reason="not the line x + A - a")
    if g > 1.0:
        if any(dj < 0 for _, dj in jumps):
            return SteadyVerdict(False, reason="downward jump")
        if np.any(s < 1.0):
            return SteadyVerdict(False, reason="a slope is below 1")
        if gl < A - tol or gr > B + tol:
            return SteadyVerdict(False, reason="boundary traces outside the data")
        return SteadyVerdict(True, 2.0)
    if jumps:
        return SteadyVerdict(False, reason="profile has a jump")
    if np.any(np.abs(s) > 1.0):
        return SteadyVerdict(False, reason="a slope exceeds 1 in absolute value")
    if abs(gl - A) > tol or abs(gr - B) > tol:
        return SteadyVerdict(False, reason="boundary value not attained")
    return SteadyVerdict(True, 0.0)


# trajectory series ------------------------------------------------------------

def diagnostics(tr: Trajectory) -> dict:
    """Per-snapshot series plus monotonicity flags."""
    d = {k: list(v) for k, v in tr.diagnostics.items()}
    E, l2 = d["total_energy"], d["l2"]
    scale = 1.0 + (E[0] if E else 0.0)
    d["energy_nonincreasing"] = all(E[i + 1] <= E[i] + 1e-10 * scale for i in range(len(E) - 1))
    bc = tr.snapshots[0][1].bc
    if bc.kind is BCKind.NEUMANN or (bc.kind is BCKind.DIRICHLET and bc.A == 0 and bc.B == 0):
        d["l2_nonincreasing"] = all(l2[i + 1] <= l2[i] + 1e-10 * (1 + l2[0]) for i in range(len(l2) - 1))
    else:
        d["l2_nonincreasing"] = None
    d["facet_count_finite"] = all(math.isfinite(c) for c in d["facet_count_nonzero_curv"])
    D = d["dissipation_integral"]
    d["ledger_error"] = max((abs(E[i] + D[i] - E[0]) for i in range(len(E))), default=0.0)
    d["rate_bound_ok"] = all(t * r <= Di * (1 + 1e-9) + 1e-12 for t, r, Di in
                             zip(d["t"], d["dissipation_rate"], D) if math.isfinite(r))
    return d
