"""Line-and-node representation used by the facet calculus and the tracker.

Every piece is a line u = s*x + c between two nodes.  Facets are pieces with
s exactly +-1.  Frozen pieces never change (s, c), so a frozen region is
reproduced bit for bit.  Periodic chains use unrolled coordinates: the last
piece runs from xs[-1] to xs[0] + P.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import StructuralError
from .profile import BCKind, BoundaryCondition, Breakpoint, Profile, canonical, snap_slope

INF = math.inf


def singular_between(s_from: float, s_to: float) -> list[int]:
    """Singular slopes strictly between two one-sided slopes, in traversal order."""
    if s_from < s_to:
        return [p for p in (-1, 1) if s_from < p < s_to]
    if s_from > s_to:
        return [p for p in (1, -1) if s_to < p < s_from]
    return []


@dataclass
class End:
    kind: str  # corner | jump | dirichlet | attached | neumann
    node: int
    pinned: bool
    neighbor: int | None = None  # piece index for corners
    q: float | None = None  # neighbour slope for corners
    other: float | None = None  # value across a jump or the wall datum


@dataclass
class FacetInfo:
    seg: int
    fid: int
    p: int
    c: float
    xi_minus: float
    xi_plus: float
    left: End
    right: End
    chi_l: int
    chi_r: int
    omega_minus: float
    omega_plus: float

    @property
    def kappa(self) -> float:
        return self.omega_plus - self.omega_minus

    @property
    def length(self) -> float:
        return self.xi_plus - self.xi_minus


@dataclass
class Chain:
    a: float
    b: float
    bc: BoundaryCondition
    xs: list[float]
    s: list[float]
    c: list[float]
    jump: list[bool]
    ids: list[int]
    tol_x: float
    tol_u: float
    _counter: itertools.count = field(default=None, repr=False)

    # construction ---------------------------------------------------------
    @classmethod
    def from_profile(cls, p: Profile) -> "Chain":
        p = canonical(p)
        bp = p.breakpoints
        periodic = p.bc.kind is BCKind.PERIODIC
        xs, s, c, jump = [], [], [], []
        for i in range(len(bp) - 1):
            l, r = bp[i], bp[i + 1]
            sl = snap_slope((r.u_left - l.u_right) / (r.x - l.x))
            s.append(sl)
            c.append(l.u_right - sl * l.x)
            xs.append(l.x)
        tol_u = 1e-12 * p.value_scale()
        if periodic:
            jump = [abs(q.u_right - q.u_left) > tol_u for q in bp[:-1]]
        else:
            xs.append(bp[-1].x)
            jump = [False] + [abs(q.u_right - q.u_left) > tol_u for q in bp[1:-1]] + [False]
        ch = cls(p.a, p.b, p.bc, xs, s, c, jump, list(range(len(s))),
                 1e-12 * (p.b - p.a), tol_u)
        ch._counter = itertools.count(len(s))
        ch.canonicalize()
        return ch

    def copy(self) -> "Chain":
        ch = Chain(self.a, self.b, self.bc, list(self.xs), list(self.s), list(self.c),
                   list(self.jump), list(self.ids), self.tol_x, self.tol_u)
        ch._counter = self._counter
        return ch

    def new_id(self) -> int:
        return next(self._counter)

    # topology -------------------------------------------------------------
    @property
    def periodic(self) -> bool:
        return self.bc.kind is BCKind.PERIODIC

    @property
    def P(self) -> float:
        return self.b - self.a

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def n_nodes(self) -> int:
        return len(self.xs)

    def lseg(self, i: int) -> int | None:
        if self.periodic:
            return (i - 1) % self.n
        return i - 1 if i > 0 else None

    def rseg(self, i: int) -> int | None:
        if self.periodic:
            return i % self.n
        return i if i < self.n else None

    def lnode(self, j: int) -> int:
        return j

    def rnode(self, j: int) -> int:
        return (j + 1) % self.n if self.periodic else j + 1

    def is_wall(self, i: int) -> bool:
        return not self.periodic and (i == 0 or i == self.n)

    def left_x(self, j: int) -> float:
        return self.xs[j]

    def right_x(self, j: int) -> float:
        if self.periodic and j == self.n - 1:
            return self.xs[0] + self.P
        return self.xs[j + 1]

    def length(self, j: int) -> float:
        return self.right_x(j) - self.left_x(j)

    def left_line(self, i: int) -> tuple[float, float]:
        """Line of the piece left of node i, in node i's coordinates."""
        j = self.lseg(i)
        if self.periodic and i == 0:
            return self.s[j], self.c[j] + self.s[j] * self.P
        return self.s[j], self.c[j]

    def right_line(self, i: int) -> tuple[float, float]:
        j = self.rseg(i)
        return self.s[j], self.c[j]

    def val_left(self, i: int) -> float:
        if self.lseg(i) is None:
            return self.val_right(i)
        s, c = self.left_line(i)
        return s * self.xs[i] + c

    def val_right(self, i: int) -> float:
        if self.rseg(i) is None:
            return self.val_left(i)
        s, c = self.right_line(i)
        return s * self.xs[i] + c

    def is_facet(self, j: int) -> bool:
        return self.s[j] == 1.0 or self.s[j] == -1.0

    def trace(self, side: str) -> float:
        return self.val_right(0) if side == "left" else self.val_left(self.n)

    # editing --------------------------------------------------------------
    def _node_is_jump(self, i: int) -> bool:
        if self.is_wall(i):
            return False
        return abs(self.val_right(i) - self.val_left(i)) > self.tol_u

    def remove_piece(self, j: int) -> None:
        """Delete piece j (zero length) and fuse its two nodes."""
        n = self.n
        if self.periodic:
            if n == 1:
                raise StructuralError("cannot remove the only piece")
            r = (j + 1) % n
            del self.s[j], self.c[j], self.ids[j]
            # a jump node is pinned: the fused node sits where it was
            if r == 0:
                # nodes j and 0 fuse; keep node 0 (in its own frame)
                if self.jump[j] and not self.jump[0]:
                    self.xs[0] = self.xs[j] - self.P
                del self.xs[j], self.jump[j]
                i = 0
            else:
                if self.jump[r] and not self.jump[j]:
                    self.xs[j] = self.xs[r]
                del self.xs[r], self.jump[r]
                i = j
            self.jump[i] = self._node_is_jump(i)
            return
        del self.s[j], self.c[j], self.ids[j]
        if j == 0:
            del self.xs[1], self.jump[1]
            i = 0
        elif j == n - 1:
            keep = self.xs[j + 1]
            del self.xs[j], self.jump[j]
            self.xs[-1] = keep
            i = self.n
        else:
            if self.jump[j + 1] and not self.jump[j]:
                self.xs[j] = self.xs[j + 1]
            del self.xs[j + 1], self.jump[j + 1]
            i = j
        if not self.is_wall(i):
            self.jump[i] = self._node_is_jump(i)

    def merge_at(self, i: int) -> None:
        """Fuse the two collinear pieces meeting at continuous node i."""
        jl, jr = self.lseg(i), self.rseg(i)
        keep_right = self.length(jr) > self.length(jl)
        if self.periodic and i == 0:
            # new piece = last piece extended; express the kept line in its frame
            s = self.s[jl]
            c = self.c[jr] - s * self.P if keep_right else self.c[jl]
            fid = self.ids[jr] if keep_right else self.ids[jl]
            del self.s[0], self.c[0], self.ids[0], self.xs[0], self.jump[0]
            self.s[-1], self.c[-1], self.ids[-1] = s, c, fid
            return
        if keep_right:
            self.c[jl] = self.c[jr]
            self.ids[jl] = self.ids[jr]
        del self.s[jr], self.c[jr], self.ids[jr], self.xs[i], self.jump[i]

    def canonicalize(self) -> None:
        """Drop zero-length pieces, close vanished jumps, merge collinear pieces."""
        changed = True
        while changed:
            changed = False
            for j in range(self.n):
                if self.n > 1 and self.length(j) <= self.tol_x:
                    self.remove_piece(j)
                    changed = True
                    break
            if changed:
                continue
            for i in range(self.n_nodes):
                if self.is_wall(i):
                    continue
                if self.jump[i] and not self._node_is_jump(i):
                    self.jump[i] = False
                if self.jump[i] or self.n < 2:
                    continue
                jl, jr = self.lseg(i), self.rseg(i)
                sl, sr = self.s[jl], self.s[jr]
                same = sl == sr if (abs(sl) == 1.0 or abs(sr) == 1.0) else (
                    abs(sl - sr) <= 1e-12 * max(1.0, abs(sl), abs(sr)))
                if same:
                    self.merge_at(i)
                    changed = True
                    break

    def seed(self) -> list[int]:
        """Create every missing degenerate facet; return the new facet ids."""
        created: list[int] = []
        while True:
            step = self._seed_once()
            if not step:
                return created
            created += step

    def _wall_slopes(self, side: str) -> list[int]:
        kind = self.bc.kind
        if kind is BCKind.PERIODIC:
            return []
        sl = self.s[0] if side == "left" else self.s[-1]
        if kind is BCKind.NEUMANN:
            if abs(sl) > 1.0:
                return [1 if sl > 0 else -1]
            return []
        gamma = self.trace(side)
        datum = self.bc.A if side == "left" else self.bc.B
        if abs(gamma - datum) <= self.tol_u:
            return []
        if side == "left":
            J = INF if gamma > datum else -INF
            return singular_between(J, sl)
        J = INF if datum > gamma else -INF
        return singular_between(sl, J)

    def _seed_once(self) -> list[int]:
        if not self.periodic:
            ps = self._wall_slopes("left")
            if ps:
                return self._insert_at_node(0, self.xs[0], self.val_right(0), ps)
            ps = self._wall_slopes("right")
            if ps:
                i = self.n
                return self._insert_at_node(i, self.xs[i], self.val_left(i), ps)
        for i in range(self.n_nodes):
            if self.is_wall(i):
                continue
            sl, sr = self.s[self.lseg(i)], self.s[self.rseg(i)]
            x = self.xs[i]
            if not self.jump[i]:
                ps = singular_between(sl, sr)
                if ps:
                    return self._insert_at_node(i, x, self.val_right(i), ps)
                continue
            vl, vr = self.val_left(i), self.val_right(i)
            J = INF if vr > vl else -INF
            ps = singular_between(sl, J)
            if ps:
                return self._insert_at_node(i, x, vl, ps, mode="before_jump")
            ps = singular_between(J, sr)
            if ps:
                return self._insert_at_node(i, x, vr, ps, mode="after_jump")
        return []

    def _insert_at_node(self, i: int, x: float, v: float, ps: list[int],
                        mode: str = "corner") -> list[int]:
        """Insert zero-length facets through (x, v) right after node i.

        The new pieces take indices i..i+k-1 and new nodes i+1..i+k sit at x.
        For ``before_jump`` the jump moves to node i+k; for ``after_jump`` it
        stays at node i.
        """
        k = len(ps)
        new = []
        for m, p in enumerate(ps):
            fid = self.new_id()
            self.s.insert(i + m, float(p))
            self.c.insert(i + m, v - p * x)
            self.ids.insert(i + m, fid)
            new.append(fid)
        for _ in range(k):
            self.xs.insert(i + 1, x)
            self.jump.insert(i + 1, False)
        if mode == "before_jump":
            self.jump[i] = False
            self.jump[i + k] = True
        elif mode == "after_jump":
            self.jump[i] = True
        return new

    # facet calculus -------------------------------------------------------
    def _end(self, j: int, side: str) -> End:
        i = self.lnode(j) if side == "left" else self.rnode(j)
        if self.is_wall(i):
            kind = self.bc.kind
            if kind is BCKind.NEUMANN:
                return End("neumann", i, True)
            datum = self.bc.A if side == "left" else self.bc.B
            gamma = self.trace(side)
            if abs(gamma - datum) <= self.tol_u:
                return End("attached", i, True, other=datum)
            return End("dirichlet", i, True, other=datum)
        if self.jump[i]:
            other = self.val_left(i) if side == "left" else self.val_right(i)
            return End("jump", i, True, other=other)
        k = self.lseg(i) if side == "left" else self.rseg(i)
        return End("corner", i, False, neighbor=k, q=self.s[k])

    def facet_info(self, j: int) -> FacetInfo:
        p = int(self.s[j])
        left, right = self._end(j, "left"), self._end(j, "right")
        xl, xr = self.left_x(j), self.right_x(j)
        vl, vr = p * xl + self.c[j], p * xr + self.c[j]

        def chi(end: End, v: float, side: str) -> int | None:
            if end.kind == "corner":
                if side == "left":
                    return 1 if end.q < p else -1
                return 1 if end.q > p else -1
            if end.kind in ("jump", "dirichlet"):
                return 1 if end.other > v else -1
            if end.kind == "neumann":
                return p if side == "left" else -p
            return None

        cl, cr = chi(left, vl, "left"), chi(right, vr, "right")
        om_m = None if cl is None else p - cl
        om_p = None if cr is None else p + cr
        if om_m is None and om_p is None:
            om_m = om_p = float(p)
        elif om_m is None:
            om_m = om_p
        elif om_p is None:
            om_p = om_m
        cl = int(round(p - om_m)) if cl is None else cl
        cr = int(round(om_p - p)) if cr is None else cr
        return FacetInfo(j, self.ids[j], p, self.c[j], xl, xr, left, right, cl, cr,
                         float(om_m), float(om_p))

    def facets(self) -> list[FacetInfo]:
        return [self.facet_info(j) for j in range(self.n) if self.is_facet(j)]

    def omega_samples(self) -> list[tuple[float, float]]:
        """Continuous Omega as (x, value) samples; raises StructuralError on mismatch."""
        pieces = []
        info = {f.seg: f for f in self.facets()}
        for j in range(self.n):
            if j in info:
                pieces.append((self.left_x(j), self.right_x(j), info[j].omega_minus, info[j].omega_plus))
            else:
                w = omega_of_slope(self.s[j])
                pieces.append((self.left_x(j), self.right_x(j), w, w))
        out: list[tuple[float, float]] = []
        for k, (x0, x1, w0, w1) in enumerate(pieces):
            i = self.lnode(k)
            if k > 0 or self.periodic:
                prev = pieces[k - 1][3]
                if prev != w0:
                    raise StructuralError(f"Omega discontinuous at x={x0}: {prev} vs {w0}")
            if not self.is_wall(i) and self.jump[i]:
                want = 2.0 if self.val_right(i) > self.val_left(i) else -2.0
                if w0 != want:
                    raise StructuralError(f"|Omega| != 2 at the jump at x={x0}")
            out.append((x0, w0))
            out.append((x1, w1))
        if not self.periodic:
            for side, w in (("left", pieces[0][2]), ("right", pieces[-1][3])):
                end = 0 if side == "left" else self.n
                self._check_wall_omega(side, w, end)
        return out

    def _check_wall_omega(self, side: str, w: float, node: int) -> None:
        kind = self.bc.kind
        if kind is BCKind.NEUMANN and w != 0.0:
            raise StructuralError(f"Neumann wall ({side}) has Omega={w}")
        if kind is BCKind.DIRICHLET:
            datum = self.bc.A if side == "left" else self.bc.B
            g = self.trace(side)
            if abs(g - datum) <= self.tol_u:
                return
            if side == "left":
                want = 2.0 if g > datum else -2.0
            else:
                want = 2.0 if g < datum else -2.0
            if w != want:
                raise StructuralError(f"detached wall ({side}) has Omega={w}, expected {want}")

    # export ---------------------------------------------------------------
    def node_values(self, i: int) -> tuple[float, float]:
        vl, vr = self.val_left(i), self.val_right(i)
        if self.is_wall(i) or not self.jump[i]:
            jl, jr = self.lseg(i), self.rseg(i)
            if jl is not None and not self.is_facet(jl):
                return vl, vl
            if jr is not None and not self.is_facet(jr):
                return vr, vr
            v = vl if jl is not None else vr
            return v, v
        return vl, vr

    def to_profile(self) -> Profile:
        recs = []
        jumpy = []
        for i in range(self.n_nodes):
            x = self.xs[i]
            uL, uR = self.node_values(i)
            is_jump = self.jump[i] and not self.is_wall(i)
            if recs and x - recs[-1][0] <= self.tol_x:
                # collapse nodes of zero-length pieces; rounding must not fake a jump
                # a jump is pinned, so its position wins
                x0 = x if is_jump and not jumpy[-1] else recs[-1][0]
                jumpy[-1] = jumpy[-1] or is_jump
                uL0 = recs[-1][1]
                recs[-1] = (x0, uL0, uR if jumpy[-1] else uL0)
            else:
                recs.append((x, uL, uR))
                jumpy.append(is_jump)
        if not self.periodic:
            recs[0] = (self.a, recs[0][2], recs[0][2])
            recs[-1] = (self.b, recs[-1][1], recs[-1][1])
            bps = tuple(Breakpoint(*r) for r in recs)
            return canonical(Profile((self.a, self.b), bps, self.bc))
        return self._periodic_profile(recs)

    def value_unrolled(self, xq: float) -> float:
        """Right-limit value at an unrolled coordinate in [xs[0], xs[0] + P)."""
        for j in range(self.n):
            if self.left_x(j) <= xq < self.right_x(j):
                return self.s[j] * xq + self.c[j]
        j = self.n - 1
        return self.s[j] * xq + self.c[j]

    def _periodic_profile(self, recs) -> Profile:
        a, b, P = self.a, self.b, self.P
        x0 = self.xs[0]
        while len(recs) > 1 and recs[-1][0] >= x0 + P - self.tol_x:
            r = recs.pop()
            recs[0] = (recs[0][0], r[1], recs[0][2])
        wrap = None
        inner = []
        for x, uL, uR in recs:
            y = a + ((x - a) % P)
            if y - a <= self.tol_x or b - y <= self.tol_x:
                wrap = (uL, uR)
            else:
                inner.append((y, uL, uR))
        inner.sort()
        if wrap is None:
            v = self.value_unrolled(x0 + ((a - x0) % P))
            wrap = (v, v)
        bps = [Breakpoint(a, *wrap)] + [Breakpoint(*r) for r in inner] + [Breakpoint(b, *wrap)]
        return canonical(Profile((a, b), tuple(bps), self.bc))


def omega_of_slope(s: float) -> float:
    if s > 1.0:
        return 2.0
    if s < -1.0:
        return -2.0
    if -1.0 < s < 1.0:
        return 0.0
    raise StructuralError("facet slope has no single Omega value")
