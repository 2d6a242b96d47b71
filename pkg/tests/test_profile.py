import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import build, profiles
from facetflow.errors import DomainError, ParseError, UnsupportedBoundary, ValidationError
from facetflow.profile import (BoundaryCondition, Profile, canonical, check, energy, evaluate,
                               evaluate_many, l2_distance, l2_norm, reflect_extend, restrict, shift,
                               snap_slope, validate)

D00 = BoundaryCondition.dirichlet(0, 0)
NEU = BoundaryCondition.neumann()


def tent(bc=D00, h=2.0):
    return Profile.from_points([-1.0, 0.0, 1.0], [h - 1, h, h - 1], bc)


def step_profile():
    return Profile((-1.0, 1.0), ((-1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (1.0, 1.0, 1.0)), NEU)


class TestValidate:
    def test_tent_ok(self):
        assert validate(tent()) == []

    def test_unsorted(self):
        p = Profile((0.0, 1.0), ((0.0, 0, 0), (0.7, 1, 1), (0.3, 0, 0), (1.0, 0, 0)), NEU)
        assert "unsorted at index 2" in validate(p)

    def test_wrap_mismatch(self):
        p = Profile.from_points([0.0, 0.5, 1.0], [0.0, 1.0, 0.5], BoundaryCondition.periodic())
        assert validate(p) == ["periodic wrap mismatch"]

    @pytest.mark.parametrize("bps, msg", [
        (((0.0, 0, 0),), "fewer than two breakpoints"),
        (((0.0, 0, 0), (0.5, math.nan, 0), (1.0, 0, 0)), "non-finite value at index 1"),
        (((0.1, 0, 0), (1.0, 0, 0)), "first breakpoint is not the left end of the domain"),
    ])
    def test_violations_named(self, bps, msg):
        assert msg in validate(Profile((0.0, 1.0), bps, NEU))

    def test_check_raises_with_every_violation(self):
        p = Profile((0.0, 1.0), ((0.2, 0, 0), (0.1, 0, 0)), NEU)
        with pytest.raises(ValidationError) as ei:
            check(p)
        assert len(ei.value.violations) >= 2


class TestEvaluate:
    @pytest.mark.parametrize("p, x, want", [
        (tent(), 0.0, (2.0, 2.0)),
        (step_profile(), 0.0, (0.0, 1.0)),
        (tent(), 0.5, (1.5, 1.5)),
        (tent(), -1.0, (1.0, 1.0)),
    ])
    def test_examples(self, p, x, want):
        assert evaluate(p, x) == want

    @pytest.mark.parametrize("x", [-1.0000001, 2.0, math.inf])
    def test_outside(self, x):
        with pytest.raises(DomainError):
            evaluate(tent(), x)

    @given(profiles(jump_prob=0.3), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_affine_on_segments(self, p, f1, f2):
        for k, s in enumerate(p.slopes):
            x0, x1 = p.breakpoints[k].x, p.breakpoints[k + 1].x
            y1, y2 = x0 + f1 * (x1 - x0), x0 + f2 * (x1 - x0)
            assert evaluate(p, y2)[0] - evaluate(p, y1)[0] == pytest.approx(s * (y2 - y1), abs=1e-12)

    def test_vectorised_matches_scalar(self):
        p = step_profile()
        x = np.array([-1.0, -0.5, 0.0, 0.25, 1.0])
        assert list(evaluate_many(p, x, "left")) == [evaluate(p, v)[0] for v in x]
        assert list(evaluate_many(p, x, "right")) == [evaluate(p, v)[1] for v in x]


class TestEnergy:
    @pytest.mark.parametrize("p, want", [
        (tent(), 4.0),
        (Profile.from_points([-1.0, 1.0], [0.0, 0.0], D00), 4.0),
        (step_profile(), 6.0),
        (Profile.from_points([0.0, 1.0], [0.0, 3.0], NEU), 6.0),
    ])
    def test_examples(self, p, want):
        assert energy(p).energy == pytest.approx(want, abs=1e-14)

    def test_tv_and_l2_step(self):
        r = energy(step_profile())
        assert r.tv == 1.0
        assert r.l2 == pytest.approx(1.0)

    def test_dirichlet_trace_penalty(self):
        # traces 1 and 1 against data 0: penalty 2*(1+1)
        assert energy(tent()).boundary == 4.0
        assert energy(tent()).total == 8.0

    @given(profiles(jump_prob=0.3))
    def test_lower_bound_and_equality(self, p):
        e = energy(p).energy
        L = p.b - p.a
        assert e >= 2 * L - 1e-12
        lipschitz = not p.jumps() and np.all(np.abs(p.slopes) <= 1)
        assert (abs(e - 2 * L) <= 1e-12 * (1 + e)) == lipschitz

    @given(profiles(jump_prob=0.3), st.floats(-5, 5), st.floats(-5, 5))
    def test_translation_invariance(self, p, dx, du):
        r0, r1 = energy(p), energy(shift(p, dx, du))
        assert r1.energy == pytest.approx(r0.energy, rel=1e-12, abs=1e-12)
        assert r1.tv == pytest.approx(r0.tv, rel=1e-12, abs=1e-12)
        assert r1.boundary == pytest.approx(r0.boundary, rel=1e-9, abs=1e-9)

    @given(profiles(jump_prob=0.3))
    def test_energy_against_quadrature(self, p):
        # midpoint rule is exact for piecewise-constant integrands
        e = 0.0
        for (l, r), s in zip(zip(p.breakpoints[:-1], p.breakpoints[1:]), p.slopes):
            e += (abs(s + 1) + abs(s - 1)) * (r.x - l.x)
        e += sum(2 * abs(j) for _, j in p.jumps())
        assert energy(p).energy == pytest.approx(e, rel=1e-12)


class TestL2:
    def test_examples(self):
        one = Profile.from_points([-1.0, 1.0], [1.0, 1.0], NEU)
        zero = Profile.from_points([-1.0, 1.0], [0.0, 0.0], NEU)
        assert l2_distance(tent(), tent()) == 0.0
        assert l2_distance(one, zero) == pytest.approx(math.sqrt(2), abs=1e-15)
        x = Profile.from_points([0.0, 1.0], [0.0, 1.0], NEU)
        z = Profile.from_points([0.0, 1.0], [0.0, 0.0], NEU)
        assert l2_distance(x, z) == pytest.approx(1 / math.sqrt(3), abs=1e-15)

    def test_domain_mismatch(self):
        with pytest.raises(DomainError):
            l2_distance(tent(), Profile.from_points([0.0, 1.0], [0.0, 0.0], NEU))

    @given(profiles(kinds=("neumann",), jump_prob=0.3), profiles(kinds=("neumann",), jump_prob=0.3))
    def test_against_fine_quadrature(self, p, q):
        # Gauss-Legendre on every merged cell integrates the quadratic exactly
        g = np.union1d(p.xs, q.xs)
        nodes, weights = np.polynomial.legendre.leggauss(3)
        tot = 0.0
        for x0, x1 in zip(g[:-1], g[1:]):
            y = 0.5 * (x1 - x0) * nodes + 0.5 * (x0 + x1)
            d = evaluate_many(p, y) - evaluate_many(q, y)
            tot += 0.5 * (x1 - x0) * np.sum(weights * d * d)
        assert l2_distance(p, q) == pytest.approx(math.sqrt(tot), rel=1e-9, abs=1e-12)

    @given(profiles(jump_prob=0.3))
    def test_norm_is_distance_to_zero(self, p):
        z = Profile(p.domain, ((p.a, 0, 0), (p.b, 0, 0)), p.bc)
        assert l2_norm(p) == pytest.approx(l2_distance(p, z), rel=1e-9, abs=1e-12)


class TestReflect:
    def test_odd_line(self):
        p = Profile.from_points([0.0, 1.0], [0.0, 1.0], D00)
        r = reflect_extend(p)
        assert r.domain == (-1.0, 1.0)
        assert r.bc == BoundaryCondition.periodic()
        assert [tuple(q) for q in r.breakpoints] == [(-1.0, 1.0, -1.0), (1.0, 1.0, -1.0)]
        assert evaluate(r, -0.25) == (-0.25, -0.25)
        assert validate(r) == []

    def test_hat_valley(self):
        p = Profile.from_points([0.0, 1.0, 2.0], [0.0, 1.0, 0.0], D00)
        r = reflect_extend(p)
        assert r.domain == (-2.0, 2.0)
        for x in np.linspace(-2, 2, 17):
            assert evaluate(r, x)[0] == pytest.approx(math.copysign(1, x) * (1 - abs(abs(x) - 1))
                                                      if x != 0 else 0.0, abs=1e-15)

    def test_even_mirror_neumann(self):
        xs = np.linspace(0, 1, 6)
        p = Profile.from_points(list(xs), list(xs ** 2), NEU)
        r = reflect_extend(p)
        g = np.linspace(0, 1, 23)
        assert np.allclose(evaluate_many(r, -g), evaluate_many(r, g), atol=1e-15)

    def test_unequal_dirichlet_rejected(self):
        with pytest.raises(UnsupportedBoundary):
            reflect_extend(Profile.from_points([0.0, 1.0], [0.0, 1.0], BoundaryCondition.dirichlet(0, 1)))

    def test_periodic_rejected(self):
        with pytest.raises(UnsupportedBoundary):
            reflect_extend(Profile.from_points([0.0, 1.0], [0.0, 0.0], BoundaryCondition.periodic()))

    @given(profiles(kinds=("neumann",), jump_prob=0.3))
    def test_restrict_inverts_reflect(self, p):
        back = restrict(reflect_extend(p), p.a, p.b, p.bc)
        assert back == canonical(p)


class TestCanonicalAndJson:
    def test_snap(self):
        assert snap_slope(1 + 5e-13) == 1.0
        assert snap_slope(-1 - 5e-13) == -1.0
        assert snap_slope(1 + 1e-9) == 1 + 1e-9

    def test_collinear_merged(self):
        p = Profile.from_points([0.0, 0.3, 1.0], [0.0, 0.3, 1.0], NEU)
        assert len(check(p).breakpoints) == 2

    def test_zero_length_piece_removed(self):
        p = Profile((0.0, 1.0), ((0.0, 0, 0), (0.5, 0.5, 0.5), (0.5 + 1e-15, 0.5, 0.5), (1.0, 0, 0)), NEU)
        assert len(check(p).breakpoints) == 3

    @given(profiles(jump_prob=0.3))
    def test_round_trip_bytes(self, p):
        p = check(p)
        text = p.to_json()
        assert Profile.from_json(text).to_json() == text
        assert Profile.from_json(text) == p

    @pytest.mark.parametrize("text", ["{", "[]", '{"domain": [0, 1]}',
                                      '{"domain":[0,1],"bc":{"kind":"sticky"},"breakpoints":[]}'])
    def test_parse_errors(self, text):
        with pytest.raises(ParseError):
            Profile.from_json(text)

    def test_json_shape(self):
        d = step_profile().to_dict()
        assert d["breakpoints"][1] == {"x": 0.0, "uL": 0.0, "uR": 1.0}
        assert d["bc"] == {"kind": "neumann"}
        assert "uR" not in d["breakpoints"][0]


def test_build_helper_matches_from_points():
    p = build([0.0, 0.5, 1.0], [1.0, -1.0], NEU)
    assert p == Profile.from_points([0.0, 0.5, 1.0], [0.0, 0.5, 0.0], NEU)
