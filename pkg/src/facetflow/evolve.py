"""Event-driven exact evolution of piecewise-linear profiles.

Between events every facet translates vertically with dh/dt = kappa/L(h) while
its free ends slide along frozen neighbours.  An isolated facet has L affine in
h, so h(t) solves a quadratic.  Two adjacent moving facets of opposite slope
(a coupled pair) obey a linear system once time is reparametrised by
dtau = dt/(L1*L2); that system is solved through its 2x2 eigendecomposition.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._chain import Chain, FacetInfo, singular_between
from .errors import NumericalDefect, StructuralError, SteadyState
from .profile import BCKind, EnergyReport, Profile, check, energy

log = logging.getLogger("facetflow.evolve")

N_MAX = 10**6
EVENT_KINDS = ("Created", "SegmentConsumed", "FacetMerge", "CornerMeet", "JumpClosed",
               "BoundaryContact", "Reattached", "Extinction")


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    location: float
    facet_ids: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "location", float(self.location))
        object.__setattr__(self, "facet_ids", tuple(int(i) for i in self.facet_ids))

    def to_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, "location": self.location,
                "facet_ids": list(self.facet_ids)}


@dataclass
class Trajectory:
    snapshots: list[tuple[float, Profile]]
    events: list[Event]
    diagnostics: dict
    extinction_time: float | None
    laws: dict = field(default_factory=dict)

    def times(self) -> list[float]:
        return [t for t, _ in self.snapshots]

    def at(self, t: float) -> Profile:
        for s, p in self.snapshots:
            if s == t:
                return p
        raise KeyError(t)


# motion models ----------------------------------------------------------------

def _phi(lam: float, tau: float) -> float:
    """(exp(lam*tau) - 1)/lam, continuous at lam = 0."""
    x = lam * tau
    if abs(x) < 1e-300:
        return tau
    return math.expm1(x) / lam


class _Single:
    """Isolated facet: L(h) = L0 + cL*(h - h0)."""

    def __init__(self, seg: int, kappa: float, L0: float, al: float, ar: float):
        self.segs = (seg,)
        self.seg = seg
        self.kappa = kappa
        self.L0 = max(L0, 0.0)
        self.cL = ar - al
        if self.cL * kappa < 0:
            raise NumericalDefect(f"facet {seg} would shrink while moving (negative discriminant)")
        if self.L0 == 0.0 and self.cL == 0.0:
            raise NumericalDefect(f"degenerate facet {seg} cannot grow")

    def dh(self, t: float) -> dict[int, float]:
        k = self.kappa
        if t <= 0:
            return {self.seg: 0.0}
        disc = self.L0 * self.L0 + 2.0 * self.cL * k * t
        return {self.seg: 2.0 * k * t / (self.L0 + math.sqrt(disc))}

    def t_for(self, d: float) -> float:
        if d == 0:
            return 0.0
        if d * self.kappa < 0:
            return math.inf
        return (self.L0 * d + 0.5 * self.cL * d * d) / self.kappa

    def solve(self, coefs: dict[int, float], g0: float) -> float:
        c = coefs.get(self.seg, 0.0)
        if c == 0:
            return math.inf
        return self.t_for(-g0 / c)

    def lengths(self, t: float) -> dict[int, float]:
        return {self.seg: self.L0 + self.cL * self.dh(t)[self.seg]}


class _SelfSimilar:
    """Two freshly created adjacent facets: h_i = h_i0 + alpha_i*sqrt(t)."""

    def __init__(self, segs, alphas, ells):
        self.segs = tuple(segs)
        self.alpha = tuple(alphas)
        self.ell = tuple(ells)

    def dh(self, t: float) -> dict[int, float]:
        r = math.sqrt(max(t, 0.0))
        return {s: a * r for s, a in zip(self.segs, self.alpha)}

    def solve(self, coefs: dict[int, float], g0: float) -> float:
        S = sum(coefs.get(s, 0.0) * a for s, a in zip(self.segs, self.alpha))
        if S >= 0:
            return math.inf
        return (g0 / -S) ** 2

    def lengths(self, t: float) -> dict[int, float]:
        r = math.sqrt(max(t, 0.0))
        return {s: e * r for s, e in zip(self.segs, self.ell)}


class _ExpPair:
    """Coupled pair via z = (L1, L2), dz/dtau = N z, dt/dtau = L1*L2."""

    def __init__(self, segs, kappas, L0s, e1, e2):
        self.segs = tuple(segs)
        k1, k2 = kappas
        self.k = (k1, k2)
        N = np.array([[e1[1] * k2, e1[0] * k1], [e2[1] * k2, e2[0] * k1]], dtype=float)
        lam, V = np.linalg.eig(N)
        if np.iscomplexobj(lam) and np.max(np.abs(lam.imag)) > 0:
            raise NumericalDefect("coupled pair has complex modes")
        self.lam = lam.real
        self.V = V.real
        self.w = np.linalg.solve(self.V, np.array(L0s, dtype=float))
        self.lam_max = float(max(self.lam.max(), 0.0))

    def z(self, tau: float) -> np.ndarray:
        return self.V @ (self.w * np.exp(self.lam * tau))

    def y(self, tau: float) -> tuple[float, float]:
        I = self.V @ (self.w * np.array([_phi(l, tau) for l in self.lam]))
        return self.k[0] * I[1], self.k[1] * I[0]

    def t_of_tau(self, tau: float) -> float:
        tot = 0.0
        for i in range(2):
            for j in range(2):
                tot += (self.w[i] * self.w[j] * self.V[0, i] * self.V[1, j]
                        * _phi(self.lam[i] + self.lam[j], tau))
        return tot

    def _tau_cap(self) -> float:
        return 600.0 / self.lam_max if self.lam_max > 0 else 1e300

    def tau_of_t(self, t: float) -> float:
        if t <= 0:
            return 0.0
        hi = 1e-8
        cap = self._tau_cap()
        while self.t_of_tau(hi) < t:
            hi *= 2.0
            if hi > cap:
                raise NumericalDefect("coupled pair time inversion failed")
        return brentq(lambda s: self.t_of_tau(s) - t, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)

    def dh(self, t: float) -> dict[int, float]:
        y = self.y(self.tau_of_t(t))
        return {self.segs[0]: y[0], self.segs[1]: y[1]}

    def solve(self, coefs: dict[int, float], g0: float) -> float:
        c1, c2 = coefs.get(self.segs[0], 0.0), coefs.get(self.segs[1], 0.0)

        def g(tau):
            y = self.y(tau)
            return g0 + c1 * y[0] + c2 * y[1]

        hi = 1e-8
        cap = self._tau_cap()
        while g(hi) > 0:
            hi *= 2.0
            if hi > cap:
                return math.inf
        tau = brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
        return self.t_of_tau(tau)

    def lengths(self, t: float) -> dict[int, float]:
        z = self.z(self.tau_of_t(t))
        return {self.segs[0]: float(z[0]), self.segs[1]: float(z[1])}


# candidate events -------------------------------------------------------------

@dataclass
class _Candidate:
    kind: str  # piece | jump | wall
    where: int  # piece index, node index, or 0/1 for walls
    g0: float
    coefs: dict[int, float]
    t: float = math.inf
    left_m: int | None = None
    right_m: int | None = None


class Engine:
    """Holds the state of one exact simulation."""

    def __init__(self, p0: Profile):
        self.p0 = check(p0)
        self.chain = Chain.from_profile(self.p0)
        self.t = 0.0
        self.dissipation = 0.0
        self.events: list[Event] = []
        self.extinct = False
        sc = self.p0.value_scale()
        self.tau_time = 1e-13 * max(1.0, (self.p0.b - self.p0.a) * sc)
        self.laws = {"shrunk_moving_facets": 0, "seed_gaps": 0, "jump_omega": 0,
                     "omega_continuity": 0, "pair_length_min": math.inf}
        created = self.chain.seed()
        self._record_created(created)
        self._check_structure()
        self._analyse()
        if not self.moving:
            self.extinct = True

    # bookkeeping ------------------------------------------------------------
    def _record_created(self, ids: list[int]) -> None:
        for fid in ids:
            j = self.chain.ids.index(fid)
            self.events.append(Event(self.t, "Created", self.chain.left_x(j), (fid,)))

    def _check_structure(self) -> None:
        ch = self.chain
        for i in range(ch.n_nodes):
            if ch.is_wall(i) or ch.jump[i]:
                continue
            if singular_between(ch.s[ch.lseg(i)], ch.s[ch.rseg(i)]):
                self.laws["seed_gaps"] += 1
        try:
            ch.omega_samples()
        except StructuralError as exc:
            msg = str(exc)
            key = "jump_omega" if "jump" in msg else "omega_continuity"
            self.laws[key] += 1
            log.warning("structural check failed: %s", msg)

    def _analyse(self) -> None:
        ch = self.chain
        self.infos: dict[int, FacetInfo] = {f.seg: f for f in ch.facets()}
        self.moving = {j: f for j, f in self.infos.items() if f.kappa != 0}
        self.models = self._build_models()

    def nonzero_count(self) -> int:
        return len(self.moving)

    def _rate(self, f: FacetInfo, side: str) -> float:
        end = f.left if side == "left" else f.right
        if end.pinned:
            return 0.0
        return 1.0 / (end.q - f.p)

    def _build_models(self) -> dict[int, object]:
        models: dict[int, object] = {}
        ch = self.chain
        for j, f in self.moving.items():
            if j in models:
                continue
            r = f.right
            partner = None
            if r.kind == "corner" and r.neighbor in self.moving:
                partner = self.moving[r.neighbor]
            elif f.left.kind == "corner" and f.left.neighbor in self.moving:
                partner, f = f, self.moving[f.left.neighbor]
            if partner is None or partner.seg == f.seg:
                models[j] = _Single(j, f.kappa, f.length, self._rate(f, "left"), self._rate(f, "right"))
                continue
            f1, f2 = f, partner
            m = self._pair_model(f1, f2)
            for s in m.segs:
                models[s] = m
        return models

    def _pair_model(self, f1: FacetInfo, f2: FacetInfo):
        a1, a2 = self._rate(f1, "left"), self._rate(f2, "right")
        L1, L2 = f1.length, f2.length
        k1, k2 = f1.kappa, f2.kappa
        D = f1.p - f2.p
        tol = self.chain.tol_x
        if k1 == k2 and abs(L1 - L2) <= 1e-15 * max(1.0, L1) and a1 == -a2:
            # mirror-symmetric: the shared corner stays put
            return _PairOfSingles(_Single(f1.seg, k1, L1, a1, 0.0), _Single(f2.seg, k2, L2, 0.0, a2))
        if L1 <= tol and L2 <= tol:
            r2 = (1.0 / D + a1) / (1.0 / D - a2)
            if r2 <= 0:
                raise NumericalDefect("no self-similar start for a created pair")
            r = math.sqrt(r2)
            den = (r - 1.0) / D - a1
            al1 = math.copysign(math.sqrt(2.0 * k1 / den), k1) if den * k1 > 0 else math.nan
            if not math.isfinite(al1):
                raise NumericalDefect("self-similar pair has no admissible growth rate")
            al2 = r * al1
            ell1 = (al2 - al1) / D - a1 * al1
            ell2 = a2 * al2 - (al2 - al1) / D
            return _SelfSimilar((f1.seg, f2.seg), (al1, al2), (ell1, ell2))
        e1 = (-1.0 / D - a1, 1.0 / D)
        e2 = (1.0 / D, a2 - 1.0 / D)
        return _ExpPair((f1.seg, f2.seg), (k1, k2), (L1, L2), e1, e2)

    # candidates -------------------------------------------------------------
    def _candidates(self) -> list[_Candidate]:
        ch = self.chain
        mv = self.moving
        out: list[_Candidate] = []
        for k in range(ch.n):
            if k in mv:
                continue
            coefs: dict[int, float] = {}
            lm = rm = None
            i = ch.lnode(k)
            if not ch.is_wall(i) and not ch.jump[i]:
                m = ch.lseg(i)
                if m in mv:
                    lm = m
                    coefs[m] = coefs.get(m, 0.0) - 1.0 / (ch.s[k] - ch.s[m])
            i2 = ch.rnode(k)
            if not ch.is_wall(i2) and not ch.jump[i2]:
                m2 = ch.rseg(i2)
                if m2 in mv:
                    rm = m2
                    coefs[m2] = coefs.get(m2, 0.0) + 1.0 / (ch.s[k] - ch.s[m2])
            if coefs:
                out.append(_Candidate("piece", k, ch.length(k), coefs, left_m=lm, right_m=rm))
        for i in range(ch.n_nodes):
            if ch.is_wall(i) or not ch.jump[i]:
                continue
            m, m2 = ch.lseg(i), ch.rseg(i)
            if m not in mv and m2 not in mv:
                continue
            d = ch.val_right(i) - ch.val_left(i)
            sg = 1.0 if d > 0 else -1.0
            coefs = {}
            if m2 in mv:
                coefs[m2] = coefs.get(m2, 0.0) + sg
            if m in mv:
                coefs[m] = coefs.get(m, 0.0) - sg
            out.append(_Candidate("jump", i, abs(d), coefs))
        if ch.bc.kind is BCKind.DIRICHLET:
            for side, seg, datum in (("left", 0, ch.bc.A), ("right", ch.n - 1, ch.bc.B)):
                if seg not in mv:
                    continue
                d = ch.trace(side) - datum
                if abs(d) <= ch.tol_u:
                    continue
                out.append(_Candidate("wall", 0 if side == "left" else 1, abs(d),
                                      {seg: 1.0 if d > 0 else -1.0}))
        # keep only genuinely shrinking quantities
        good = []
        for c in out:
            signs = [co * mv[s].kappa for s, co in c.coefs.items()]
            if any(v > 0 for v in signs):
                if all(v > 0 for v in signs):
                    continue
                raise StructuralError(f"candidate {c.kind}@{c.where} has mixed motion")
            good.append(c)
        return good

    def _dh_all(self, t: float) -> dict[int, float]:
        out: dict[int, float] = {}
        seen = set()
        for m in self.models.values():
            if id(m) in seen:
                continue
            seen.add(id(m))
            out.update(m.dh(t))
        return out

    def _solve(self, c: _Candidate) -> float:
        groups: dict[int, tuple[object, dict[int, float]]] = {}
        for s, co in c.coefs.items():
            m = self.models[s]
            groups.setdefault(id(m), (m, {}))[1][s] = co
        if len(groups) == 1:
            (m, co), = groups.values()
            return m.solve(co, c.g0)
        hi = min(m.solve(co, c.g0) for m, co in groups.values())
        if not math.isfinite(hi):
            return math.inf

        def g(t):
            d = self._dh_all(t)
            return c.g0 + sum(co * d[s] for s, co in c.coefs.items())

        if g(hi) > 0:
            return hi
        return brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)

    # stepping ---------------------------------------------------------------
    def state_at(self, dt: float) -> Chain:
        """Chain advanced by dt within the current step (no event processing)."""
        ch = self.chain.copy()
        if dt > 0 and self.moving:
            self._apply_heights(ch, self._dh_all(dt))
        return ch

    def _apply_heights(self, ch: Chain, dh: dict[int, float], snaps: dict[int, float] | None = None) -> None:
        for j, d in dh.items():
            ch.c[j] = self.chain.c[j] + d
        if snaps:
            for j, c in snaps.items():
                ch.c[j] = c
        moved = set(dh) | set(snaps or {})
        for i in range(ch.n_nodes):
            if ch.is_wall(i) or ch.jump[i]:
                continue
            jl, jr = ch.lseg(i), ch.rseg(i)
            if jl in moved or jr in moved:
                sl, cl = ch.left_line(i)
                sr, cr = ch.right_line(i)
                x = (cr - cl) / (sl - sr)
                if ch.periodic and i == 0:
                    ch.xs[0] = x
                else:
                    ch.xs[i] = x

    def profile(self) -> Profile:
        return self.chain.to_profile()

    def step(self, t_limit: float = math.inf) -> list[Event]:
        """Advance to the next event batch, or to t_limit if that comes first."""
        if self.extinct:
            raise SteadyState("no facet moves")
        cands = self._candidates()
        for c in cands:
            c.t = self._solve(c)
        t_star = min((c.t for c in cands), default=math.inf)
        horizon = t_limit - self.t
        if t_star > horizon:
            if not math.isfinite(horizon):
                raise NumericalDefect("moving facets but no reachable event")
            self._advance(horizon, [])
            return []
        batch = [c for c in cands if c.t <= t_star + self.tau_time]
        return self._advance(t_star, batch)

    def _advance(self, dt: float, batch: list[_Candidate]) -> list[Event]:
        ch_old = self.chain
        dh = self._dh_all(dt) if dt > 0 else {j: 0.0 for j in self.moving}
        lens_before = {j: f.length for j, f in self.moving.items()}
        for m in set(self.models.values()):
            if isinstance(m, _ExpPair):
                for L in m.lengths(dt).values():
                    self.laws["pair_length_min"] = min(self.laws["pair_length_min"], L)
        snaps = self._snaps(batch, dh)
        new = ch_old.copy()
        self._apply_heights(new, dh, snaps)
        # dissipation: kappa * dh per facet
        for j, f in self.moving.items():
            d = (snaps[j] - ch_old.c[j]) if j in snaps else dh[j]
            self.dissipation += f.kappa * d
        self.t += dt
        self.chain = new
        events = self._process(batch, lens_before)
        return events

    def _snaps(self, batch: list[_Candidate], dh: dict[int, float]) -> dict[int, float]:
        """Exact facet heights realising each event in the batch."""
        ch = self.chain
        snaps: dict[int, float] = {}
        for c in batch:
            if c.kind == "piece":
                k = c.where
                s, ck = ch.s[k], ch.c[k]
                L, R = c.left_m, c.right_m
                if L is not None and R is not None:
                    cl = ch.c[L] + dh[L] + self._frame_shift(k, L, True)
                    cr = ch.c[R] + dh[R] + self._frame_shift(k, R, False)
                    xm = 0.5 * ((ck - cl) / (ch.s[L] - s) + (ck - cr) / (ch.s[R] - s))
                    snaps[L] = (s - ch.s[L]) * xm + ck - self._frame_shift(k, L, True)
                    snaps[R] = (s - ch.s[R]) * xm + ck - self._frame_shift(k, R, False)
                elif L is not None:
                    xf = ch.right_x(k)
                    snaps[L] = (s - ch.s[L]) * xf + ck - self._frame_shift(k, L, True)
                else:
                    xf = ch.left_x(k)
                    snaps[R] = (s - ch.s[R]) * xf + ck - self._frame_shift(k, R, False)
            elif c.kind == "jump":
                i = c.where
                x = ch.xs[i]
                jl, jr = ch.lseg(i), ch.rseg(i)
                sl, cl = ch.left_line(i)
                sr, cr = ch.right_line(i)
                shl = cl - ch.c[jl]
                vl = sl * x + cl + (dh.get(jl, 0.0) if jl in c.coefs else 0.0)
                vr = sr * x + cr + (dh.get(jr, 0.0) if jr in c.coefs else 0.0)
                if jl in c.coefs and jr in c.coefs:
                    v = 0.5 * (vl + vr)
                elif jl in c.coefs:
                    v = vr
                else:
                    v = vl
                if jl in c.coefs:
                    snaps[jl] = v - sl * x - shl
                if jr in c.coefs:
                    snaps[jr] = v - sr * x
            else:
                seg = next(iter(c.coefs))
                if c.where == 0:
                    snaps[seg] = ch.bc.A - ch.s[seg] * ch.a
                else:
                    snaps[seg] = ch.bc.B - ch.s[seg] * ch.b
        return snaps

    def _frame_shift(self, k: int, m: int, m_left_of_k: bool) -> float:
        """Offset between facet m's stored intercept and its line in piece k's frame."""
        ch = self.chain
        if not ch.periodic:
            return 0.0
        if m_left_of_k and k == 0 and m == ch.n - 1:
            return ch.s[m] * ch.P
        if not m_left_of_k and k == ch.n - 1 and m == 0:
            return -ch.s[m] * ch.P
        return 0.0

    def _process(self, batch: list[_Candidate], lens_before: dict[int, float]) -> list[Event]:
        ch = self.chain
        t = self.t
        evs: list[Event] = []
        for c in batch:
            who = tuple(ch.ids[s] for s in c.coefs)
            if c.kind == "piece":
                k = c.where
                x = 0.5 * (ch.left_x(k) + ch.right_x(k))
                if ch.periodic and x >= ch.b:
                    x -= ch.P
                evs.append(Event(t, self._piece_kind(k), x, (ch.ids[k],) + who))
            elif c.kind == "jump":
                evs.append(Event(t, "JumpClosed", ch.xs[c.where], who))
            else:
                x = ch.a if c.where == 0 else ch.b
                evs.append(Event(t, "Reattached", x, who))
        for j in self.moving:
            if lens_before.get(j, 0.0) > 0 and ch.length(j) <= ch.tol_x:
                self.laws["shrunk_moving_facets"] += 1
        ch.canonicalize()
        created = ch.seed()
        self.events.extend(evs)
        n0 = len(self.events)
        self._record_created(created)
        evs += self.events[n0:]
        self._check_structure()
        self._analyse()
        if not self.moving:
            self.extinct = True
            e = Event(t, "Extinction", 0.5 * (ch.a + ch.b), ())
            self.events.append(e)
            evs.append(e)
        if len(self.events) > N_MAX:
            raise NumericalDefect(f"more than {N_MAX} events: livelock guard")
        return evs

    def _piece_kind(self, k: int) -> str:
        """Name the event in which piece k disappears."""
        ch = self.chain
        i, i2 = ch.lnode(k), ch.rnode(k)
        if ch.is_wall(i) or ch.is_wall(i2):
            return "BoundaryContact"
        if ch.jump[i] or ch.jump[i2]:
            return "SegmentConsumed"
        jl, jr = ch.lseg(i), ch.rseg(i2)
        if jl != k and jr != k and ch.is_facet(jl) and ch.is_facet(jr):
            return "FacetMerge" if ch.s[jl] == ch.s[jr] else "CornerMeet"
        return "SegmentConsumed"


class _PairOfSingles:
    """Mirror-symmetric pair: two independent facets around a fixed corner."""

    def __init__(self, s1: _Single, s2: _Single):
        self.a, self.b = s1, s2
        self.segs = (s1.seg, s2.seg)

    def dh(self, t: float) -> dict[int, float]:
        d = self.a.dh(t)
        d.update(self.b.dh(t))
        return d

    def solve(self, coefs: dict[int, float], g0: float) -> float:
        ca, cb = coefs.get(self.a.seg, 0.0), coefs.get(self.b.seg, 0.0)
        if cb == 0:
            return self.a.solve(coefs, g0)
        if ca == 0:
            return self.b.solve(coefs, g0)
        hi = min(self.a.solve({self.a.seg: ca}, g0), self.b.solve({self.b.seg: cb}, g0))
        g = lambda t: g0 + ca * self.a.dh(t)[self.a.seg] + cb * self.b.dh(t)[self.b.seg]
        return brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15) if g(hi) <= 0 else hi

    def lengths(self, t: float) -> dict[int, float]:
        d = self.a.lengths(t)
        d.update(self.b.lengths(t))
        return d


# public API -------------------------------------------------------------------

def _energy_row(p: Profile) -> EnergyReport:
    return energy(p)


def simulate(p0: Profile, t_end: float = math.inf, snapshot_times=(), *,
             max_events: int = N_MAX) -> Trajectory:
    """Run the exact tracker from p0 until extinction or t_end.

    Snapshots are taken at t=0, at every requested time, after every event
    batch (right-continuous states) and at the final time.
    """
    eng = Engine(p0)
    req = sorted(float(s) for s in snapshot_times if 0 <= s <= t_end)
    snaps: list[tuple[float, Profile]] = []
    diag = {"t": [], "energy": [], "total_energy": [], "l2": [], "tv": [],
            "facet_count_nonzero_curv": [], "dissipation_integral": [], "dissipation_rate": []}

    def record(t: float, ch: Chain, diss: float, count: int, rate: float) -> None:
        p = ch.to_profile()
        if snaps and snaps[-1][0] == t:
            snaps[-1] = (t, p)
            for key in diag:
                diag[key].pop()
        else:
            snaps.append((t, p))
        e = energy(p)
        diag["t"].append(t)
        diag["energy"].append(e.energy)
        diag["total_energy"].append(e.total)
        diag["l2"].append(e.l2)
        diag["tv"].append(e.tv)
        diag["facet_count_nonzero_curv"].append(count)
        diag["dissipation_integral"].append(diss)
        diag["dissipation_rate"].append(rate)

    def rate_now(eng: Engine, dt: float = 0.0) -> float:
        tot = 0.0
        seen = set()
        for m in eng.models.values():
            if id(m) in seen:
                continue
            seen.add(id(m))
            for s, L in m.lengths(dt).items():
                k = eng.moving[s].kappa
                tot += k * k / L if L > 0 else math.inf
        return tot

    record(0.0, eng.chain, 0.0, eng.nonzero_count(), rate_now(eng) if eng.moving else 0.0)
    qi = 0
    while not eng.extinct and eng.t < t_end:
        # take requested snapshots that fall inside this step
        cands = eng._candidates()
        for c in cands:
            c.t = eng._solve(c)
        t_star = min((c.t for c in cands), default=math.inf)
        t_next = min(eng.t + t_star, t_end)
        while qi < len(req) and req[qi] < t_next:
            if req[qi] > eng.t:
                dt = req[qi] - eng.t
                dh = eng._dh_all(dt)
                diss = eng.dissipation + sum(eng.moving[j].kappa * d for j, d in dh.items())
                record(req[qi], eng.state_at(dt), diss, eng.nonzero_count(), rate_now(eng, dt))
            qi += 1
        if eng.t + t_star > t_end:
            if not math.isfinite(t_end):
                raise NumericalDefect("moving facets but no reachable event")
            eng._advance(t_end - eng.t, [])
            eng._analyse()
            record(eng.t, eng.chain, eng.dissipation, eng.nonzero_count(), rate_now(eng) if eng.moving else 0.0)
            break
        batch = [c for c in cands if c.t <= t_star + eng.tau_time]
        eng._advance(t_star, batch)
        record(eng.t, eng.chain, eng.dissipation, eng.nonzero_count(),
               rate_now(eng) if eng.moving else 0.0)
        if len(eng.events) > max_events:
            raise NumericalDefect(f"more than {max_events} events: livelock guard")
    while qi < len(req):
        record(req[qi], eng.chain, eng.dissipation, eng.nonzero_count(), 0.0)
        qi += 1
    ext = None
    if eng.extinct:
        ext = next((e.t for e in eng.events if e.kind == "Extinction"), eng.t)
        if not any(e.kind == "Extinction" for e in eng.events):
            ext = eng.t
    traj = Trajectory(snaps, list(eng.events), diag, ext, dict(eng.laws))
    traj.laws["final_t"] = eng.t
    return traj


def step_to_next_event(p: Profile, t_now: float = 0.0) -> tuple[Profile, list[Event]]:
    """One event batch from state p at time t_now."""
    eng = Engine(p)
    if eng.extinct:
        raise SteadyState("no facet moves")
    eng.t = t_now
    created = list(eng.events)
    for e in created:
        object.__setattr__(e, "t", t_now)
    evs = eng.step()
    return eng.profile(), created + evs


def extinction_time(p0: Profile) -> float:
    """Time after which the flow from p0 is stationary."""
    tr = simulate(p0, math.inf)
    return tr.extinction_time
