"""Piecewise-linear profiles with jumps, their validation and functionals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ParseError, UnsupportedBoundary, ValidationError

TAU_SLOPE = 1e-12


class BCKind(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class BoundaryCondition:
    kind: BCKind
    A: float = 0.0
    B: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BCKind(self.kind))
        object.__setattr__(self, "A", float(self.A))
        object.__setattr__(self, "B", float(self.B))

    @classmethod
    def dirichlet(cls, A: float = 0.0, B: float = 0.0) -> "BoundaryCondition":
        return cls(BCKind.DIRICHLET, A, B)

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls(BCKind.NEUMANN)

    @classmethod
    def periodic(cls) -> "BoundaryCondition":
        return cls(BCKind.PERIODIC)

    def to_dict(self) -> dict:
        if self.kind is BCKind.DIRICHLET:
            return {"kind": self.kind.value, "A": self.A, "B": self.B}
        return {"kind": self.kind.value}


class Breakpoint(NamedTuple):
    x: float
    u_left: float
    u_right: float

    @property
    def is_jump(self) -> bool:
        return self.u_left != self.u_right


def snap_slope(s: float) -> float:
    """Return exactly +-1 for slopes within TAU_SLOPE of the singular values."""
    if abs(s - 1.0) <= TAU_SLOPE:
        return 1.0
    if abs(s + 1.0) <= TAU_SLOPE:
        return -1.0
    return s


@dataclass(frozen=True)
class Profile:
    domain: tuple[float, float]
    breakpoints: tuple[Breakpoint, ...]
    bc: BoundaryCondition
    # zero-length facets (x, p) already created by seeding; not part of the graph
    degenerate: tuple[tuple[float, int], ...] = field(default=(), compare=False)

    def __post_init__(self):
        a, b = self.domain
        object.__setattr__(self, "domain", (float(a), float(b)))
        bps = tuple(Breakpoint(float(p[0]), float(p[1]), float(p[2])) for p in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def from_points(cls, xs, us, bc: BoundaryCondition, jumps: dict | None = None) -> "Profile":
        """Continuous profile through (xs, us). ``jumps`` maps index -> right value."""
        jumps = jumps or {}
        bps = [Breakpoint(x, u, jumps.get(i, u)) for i, (x, u) in enumerate(zip(xs, us))]
        return cls((xs[0], xs[-1]), tuple(bps), bc)

    @property
    def a(self) -> float:
        return self.domain[0]

    @property
    def b(self) -> float:
        return self.domain[1]

    @property
    def xs(self) -> np.ndarray:
        return np.array([p.x for p in self.breakpoints])

    @property
    def slopes(self) -> np.ndarray:
        bp = self.breakpoints
        return np.array(
            [snap_slope((bp[i + 1].u_left - bp[i].u_right) / (bp[i + 1].x - bp[i].x))
             for i in range(len(bp) - 1)]
        )

    def jumps(self) -> list[tuple[float, float]]:
        """(x, u_right - u_left) for interior jumps, plus the wrap jump if periodic."""
        bp = self.breakpoints
        out = [(p.x, p.u_right - p.u_left) for p in bp[1:-1] if p.is_jump]
        if self.bc.kind is BCKind.PERIODIC and bp[0].is_jump:
            out.insert(0, (bp[0].x, bp[0].u_right - bp[0].u_left))
        return out

    def trace_left(self) -> float:
        return self.breakpoints[0].u_right

    def trace_right(self) -> float:
        return self.breakpoints[-1].u_left

    def value_scale(self) -> float:
        vals = [abs(v) for p in self.breakpoints for v in (p.u_left, p.u_right)]
        if self.bc.kind is BCKind.DIRICHLET:
            vals += [abs(self.bc.A), abs(self.bc.B)]
        return max([self.b - self.a] + vals)

    # serialization
    def to_dict(self) -> dict:
        bps = []
        for p in self.breakpoints:
            rec = {"x": p.x, "uL": p.u_left}
            if p.is_jump:
                rec["uR"] = p.u_right
            bps.append(rec)
        d = {"domain": [self.a, self.b], "bc": self.bc.to_dict(), "breakpoints": bps}
        if self.degenerate:
            d["degenerate"] = [[x, p] for x, p in self.degenerate]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        try:
            a, b = d["domain"]
            bcd = d["bc"]
            kind = BCKind(str(bcd["kind"]).lower())
            bc = BoundaryCondition(kind, bcd.get("A", 0.0), bcd.get("B", 0.0))
            bps = []
            for rec in d["breakpoints"]:
                uL = float(rec["uL"])
                bps.append(Breakpoint(float(rec["x"]), uL, float(rec.get("uR", uL))))
            degen = tuple((float(x), int(p)) for x, p in d.get("degenerate", ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed profile: {exc}") from exc
        return cls((float(a), float(b)), tuple(bps), bc, degen)

    @classmethod
    def from_json(cls, text: str) -> "Profile":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ParseError("profile JSON must be an object")
        return cls.from_dict(d)


@dataclass(frozen=True)
class EnergyReport:
    energy: float
    tv: float
    l2: float
    boundary: float = 0.0

    @property
    def total(self) -> float:
        """Interior energy plus the Dirichlet trace penalty."""
        return self.energy + self.boundary


def validate(p: Profile) -> list[str]:
    """List every violated invariant; an empty list means the profile is valid."""
    out: list[str] = []
    a, b = p.domain
    bp = p.breakpoints
    if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
        out.append("degenerate domain")
    if len(bp) < 2:
        out.append("fewer than two breakpoints")
        return out
    for k, q in enumerate(bp):
        if not all(math.isfinite(v) for v in q):
            out.append(f"non-finite value at index {k}")
    for k in range(1, len(bp)):
        if not bp[k].x > bp[k - 1].x:
            out.append(f"unsorted at index {k}")
    if bp[0].x != a:
        out.append("first breakpoint is not the left end of the domain")
    if bp[-1].x != b:
        out.append("last breakpoint is not the right end of the domain")
    if p.bc.kind is BCKind.DIRICHLET and not (math.isfinite(p.bc.A) and math.isfinite(p.bc.B)):
        out.append("dirichlet data not finite")
    if p.bc.kind is BCKind.PERIODIC:
        tol = 1e-12 * max(1.0, p.value_scale()) if not out else 0.0
        if abs(bp[0].u_left - bp[-1].u_left) > tol or abs(bp[0].u_right - bp[-1].u_right) > tol:
            out.append("periodic wrap mismatch")
    return out


def check(p: Profile) -> Profile:
    """Raise ValidationError unless p is valid; return the canonical form."""
    v = validate(p)
    if v:
        raise ValidationError(v)
    return canonical(p)


def canonical(p: Profile) -> Profile:
    """Merge collinear neighbours, drop zero-length pieces, tidy the end values."""
    a, b = p.domain
    tol_x = 1e-13 * (b - a)
    tol_u = 1e-12 * p.value_scale()
    bps = list(p.breakpoints)
    periodic = p.bc.kind is BCKind.PERIODIC
    if periodic:
        first, last = bps[0], bps[-1]
        bps[0] = Breakpoint(first.x, last.u_left, first.u_right)
        bps[-1] = Breakpoint(last.x, last.u_left, first.u_right)
    else:
        bps[0] = Breakpoint(bps[0].x, bps[0].u_right, bps[0].u_right)
        bps[-1] = Breakpoint(bps[-1].x, bps[-1].u_left, bps[-1].u_left)

    merged = [bps[0]]
    for q in bps[1:]:
        prev = merged[-1]
        if q.x - prev.x <= tol_x:
            keep_x = q.x if q is bps[-1] else prev.x
            merged[-1] = Breakpoint(keep_x, prev.u_left, q.u_right)
        else:
            merged.append(q)
    if len(merged) < 2:
        raise ValidationError(["profile collapses to a point"])

    changed = True
    while changed and len(merged) > 2:
        changed = False
        for i in range(1, len(merged) - 1):
            q = merged[i]
            if abs(q.u_right - q.u_left) > tol_u:
                continue
            l, r = merged[i - 1], merged[i + 1]
            s1 = snap_slope((q.u_left - l.u_right) / (q.x - l.x))
            s2 = snap_slope((r.u_left - q.u_right) / (r.x - q.x))
            if abs(s1 - s2) <= TAU_SLOPE * max(1.0, abs(s1), abs(s2)):
                del merged[i]
                changed = True
                break
    return Profile(p.domain, tuple(merged), p.bc)


def evaluate(p: Profile, x: float) -> tuple[float, float]:
    """One-sided limits (u(x-), u(x+)); equal away from jumps."""
    a, b = p.domain
    if not (a <= x <= b):
        raise DomainError(f"x={x} outside [{a}, {b}]")
    bp = p.breakpoints
    xs = [q.x for q in bp]
    k = int(np.searchsorted(xs, x))
    if k < len(bp) and bp[k].x == x:
        return bp[k].u_left, bp[k].u_right
    l, r = bp[k - 1], bp[k]
    v = l.u_right + (r.u_left - l.u_right) * (x - l.x) / (r.x - l.x)
    return v, v


def evaluate_many(p: Profile, x: np.ndarray, side: str = "right") -> np.ndarray:
    """Vectorised evaluation; at breakpoints returns the requested one-sided value."""
    bp = p.breakpoints
    xs = np.array([q.x for q in bp])
    uL = np.array([q.u_left for q in bp])
    uR = np.array([q.u_right for q in bp])
    x = np.asarray(x, dtype=float)
    k = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(bp) - 2)
    t = (x - xs[k]) / (xs[k + 1] - xs[k])
    out = uR[k] + (uL[k + 1] - uR[k]) * t
    hit = np.isin(x, xs)
    if hit.any():
        idx = np.searchsorted(xs, x[hit])
        out[hit] = (uR if side == "right" else uL)[idx]
    return out


def energy(p: Profile) -> EnergyReport:
    """Integral of W(Du) with W(q)=|q+1|+|q-1|; jumps count twice their size."""
    bp = p.breakpoints
    e = tv = sq = 0.0
    for l, r in zip(bp[:-1], bp[1:]):
        dx = r.x - l.x
        du = r.u_left - l.u_right
        e += abs(du + dx) + abs(du - dx)
        tv += abs(du)
        sq += dx * (l.u_right**2 + l.u_right * r.u_left + r.u_left**2) / 3.0
    for _, j in p.jumps():
        e += 2.0 * abs(j)
        tv += abs(j)
    boundary = 0.0
    if p.bc.kind is BCKind.DIRICHLET:
        boundary = 2.0 * (abs(p.trace_left() - p.bc.A) + abs(p.trace_right() - p.bc.B))
    return EnergyReport(e, tv, math.sqrt(max(sq, 0.0)), boundary)


def _merged_grid(p: Profile, q: Profile) -> np.ndarray:
    return np.union1d(p.xs, q.xs)


def l2_distance(p: Profile, q: Profile) -> float:
    """Exact L2 distance of two piecewise-affine functions."""
    if p.domain != q.domain:
        raise DomainError("profiles live on different domains")
    g = _merged_grid(p, q)
    lo = evaluate_many(p, g[:-1], "right") - evaluate_many(q, g[:-1], "right")
    hi = evaluate_many(p, g[1:], "left") - evaluate_many(q, g[1:], "left")
    dx = np.diff(g)
    return math.sqrt(max(float(np.sum(dx * (lo * lo + lo * hi + hi * hi) / 3.0)), 0.0))


def l2_norm(p: Profile) -> float:
    return energy(p).l2


def restrict(p: Profile, a: float, b: float, bc: BoundaryCondition | None = None) -> Profile:
    """Restriction to [a, b] (a sub-interval of the domain)."""
    if not (p.a <= a < b <= p.b):
        raise DomainError("restriction interval not inside the domain")
    inner = [q for q in p.breakpoints if a < q.x < b]
    la = evaluate(p, a)[1]
    rb = evaluate(p, b)[0]
    bps = [Breakpoint(a, la, la)] + inner + [Breakpoint(b, rb, rb)]
    return canonical(Profile((a, b), tuple(bps), bc or p.bc))


def reflect_extend(p: Profile) -> Profile:
    """Mirror across the left wall: odd about A for Dirichlet (A=B), even for Neumann.

    The result lives on [2a-b, b] and is tagged periodic.
    """
    a, b = p.domain
    kind = p.bc.kind
    if kind is BCKind.DIRICHLET:
        if p.bc.A != p.bc.B:
            raise UnsupportedBoundary("odd reflection needs equal Dirichlet values")
        c = p.bc.A

        def mirror(q: Breakpoint) -> Breakpoint:
            return Breakpoint(2 * a - q.x, 2 * c - q.u_right, 2 * c - q.u_left)
    elif kind is BCKind.NEUMANN:
        def mirror(q: Breakpoint) -> Breakpoint:
            return Breakpoint(2 * a - q.x, q.u_right, q.u_left)
    else:
        raise UnsupportedBoundary("reflection applies to Dirichlet or Neumann data")

    bp = p.breakpoints
    left = [mirror(q) for q in reversed(bp[1:])]
    join = Breakpoint(a, mirror(bp[0]).u_left, bp[0].u_right)
    wrap_left = bp[-1].u_left
    wrap_right = mirror(bp[-1]).u_right
    left[0] = Breakpoint(left[0].x, wrap_left, wrap_right)
    right = list(bp[1:])
    right[-1] = Breakpoint(right[-1].x, wrap_left, wrap_right)
    out = Profile((2 * a - b, b), tuple(left + [join] + right), BoundaryCondition.periodic())
    return canonical(out)


def shift(p: Profile, dx: float = 0.0, du: float = 0.0) -> Profile:
    """Translate the graph (and the Dirichlet data) by (dx, du)."""
    bp = tuple(Breakpoint(q.x + dx, q.u_left + du, q.u_right + du) for q in p.breakpoints)
    bc = p.bc
    if bc.kind is BCKind.DIRICHLET:
        bc = BoundaryCondition.dirichlet(bc.A + du, bc.B + du)
    return Profile((p.a + dx, p.b + dx), bp, bc)


def scale_heights(p: Profile, s: float) -> Profile:
    bp = tuple(Breakpoint(q.x, s * q.u_left, s * q.u_right) for q in p.breakpoints)
    bc = p.bc
    if bc.kind is BCKind.DIRICHLET:
        bc = BoundaryCondition.dirichlet(s * bc.A, s * bc.B)
    return Profile(p.domain, bp, bc)


def sup_distance(p: Profile, q: Profile, grid: Sequence[float] | None = None) -> float:
    """Max difference over all breakpoints of both (exact for piecewise-affine data)."""
    if p.domain != q.domain:
        raise DomainError("profiles live on different domains")
    g = _merged_grid(p, q) if grid is None else np.asarray(grid)
    dl = evaluate_many(p, g, "left") - evaluate_many(q, g, "left")
    dr = evaluate_many(p, g, "right") - evaluate_many(q, g, "right")
    return float(max(np.max(np.abs(dl)), np.max(np.abs(dr))))


def is_below(p: Profile, q: Profile, tol: float = 0.0) -> bool:
    """p <= q pointwise (both one-sided limits at every breakpoint)."""
    g = _merged_grid(p, q)
    dl = evaluate_many(p, g, "left") - evaluate_many(q, g, "left")
    dr = evaluate_many(p, g, "right") - evaluate_many(q, g, "right")
    return bool(np.all(dl <= tol) and np.all(dr <= tol))


def breakpoints_from(records: Iterable[tuple[float, float, float]]) -> tuple[Breakpoint, ...]:
    return tuple(Breakpoint(*r) for r in records)
