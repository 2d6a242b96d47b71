"""Facet detection, transition numbers and the Omega field of a profile."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

from ._chain import Chain, FacetInfo
from .errors import DegenerateFacet
from .profile import Profile, check


@dataclass(frozen=True)
class Facet:
    xi_minus: float
    xi_plus: float
    p: int
    chi_l: int
    chi_r: int
    omega_minus: float
    omega_plus: float
    pinned_left: bool
    pinned_right: bool
    id: int = -1

    @property
    def kappa(self) -> float:
        return self.omega_plus - self.omega_minus

    @property
    def length(self) -> float:
        return max(self.xi_plus - self.xi_minus, 0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kappa"] = self.kappa
        d["length"] = self.length
        return d


@dataclass(frozen=True)
class OmegaField:
    """Continuous piecewise-affine Omega, given by ordered (x, value) samples."""

    samples: tuple[tuple[float, float], ...]

    def __call__(self, x: float) -> float:
        s = self.samples
        if x <= s[0][0]:
            return s[0][1]
        for (x0, w0), (x1, w1) in zip(s, s[1:]):
            if x0 <= x <= x1:
                if x1 == x0:
                    return w1
                return w0 + (w1 - w0) * (x - x0) / (x1 - x0)
        return s[-1][1]

    @property
    def max_abs(self) -> float:
        return max(abs(w) for _, w in self.samples)


def _to_facet(f: FacetInfo, ch: Chain) -> Facet:
    xm, xp = f.xi_minus, f.xi_plus
    if ch.periodic and xm >= ch.b:
        xm -= ch.P
        xp -= ch.P
    return Facet(xm, xp, f.p, f.chi_l, f.chi_r, f.omega_minus, f.omega_plus,
                 f.left.pinned, f.right.pinned, f.fid)


def detect_facets(p: Profile) -> list[Facet]:
    """Facets of p in left-to-right order, without creating new ones."""
    ch = Chain.from_profile(check(p))
    return [_to_facet(f, ch) for f in ch.facets()]


def seed_missing_facets(p: Profile) -> tuple[Profile, list[Facet]]:
    """Insert the zero-length facets the flow creates instantly.

    The returned profile is the same function; it remembers the created facets
    so seeding it again creates nothing.
    """
    ch = Chain.from_profile(check(p))
    new_ids = set(ch.seed())
    made = [_to_facet(f, ch) for f in ch.facets() if f.fid in new_ids]
    known = list(p.degenerate)
    fresh = []
    for f in made:
        hit = next((k for k in known if k[1] == f.p and abs(k[0] - f.xi_minus) <= ch.tol_x), None)
        if hit is not None:
            known.remove(hit)
        else:
            fresh.append(f)
    out = ch.to_profile()
    out = replace(out, degenerate=tuple((f.xi_minus, f.p) for f in made))
    return out, fresh


def facet_velocity(f: Facet) -> float:
    """Vertical speed dh/dt of a facet of positive length."""
    if f.length <= 0:
        raise DegenerateFacet("degenerate: integrate in h")
    return f.kappa / f.length


def omega_field(p: Profile) -> OmegaField:
    """Omega of the seeded profile; raises StructuralError if it cannot be continuous."""
    ch = Chain.from_profile(check(p))
    ch.seed()
    samples = ch.omega_samples()
    if ch.periodic:
        samples = [((x - ch.P) if x > ch.b else x, w) for x, w in samples]
        samples.sort(key=lambda s: s[0])
    return OmegaField(tuple(samples))


def facets_to_json(facets: list[Facet]) -> str:
    return json.dumps([f.to_dict() for f in facets])
