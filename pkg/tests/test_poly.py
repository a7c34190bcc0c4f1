import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonterm.poly import (Atom, Constraint, MissingVariable, Poly, UpdateMap,
                          apply_subst, atoms_from_relation, is_integer_valued,
                          sum_over_range)

from .loops import C, ge, gt, X, Y, ONE

K = Poly.var("k")
HALF = Fraction(1, 2)


def quadratic_descent():
    # x - y*k - k^2/2 + k/2: the closed form of the two-phase program's
    # first loop, used across the suite.
    return X - Y * K - K.pow(2).scale(HALF) + K.scale(HALF)


class TestEval:
    def test_quadratic_descent_at_two_steps(self):
        assert quadratic_descent().eval({"x": 0, "y": 0, "k": 2}) == -1

    def test_zero_poly(self):
        assert Poly.zero().eval({}) == 0
        assert Poly.zero().eval({"x": 17}) == 0

    def test_product_plus_constant(self):
        e = X * Y + Poly.const(3)
        assert e.eval({"x": 2, "y": -5}) == -7

    def test_missing_variable(self):
        with pytest.raises(MissingVariable):
            (X + Y).eval({"x": 1})

    def test_exact_rationals(self):
        assert K.scale(HALF).eval({"k": 3}) == Fraction(3, 2)


class TestCanonicalForm:
    def test_cancellation_drops_terms(self):
        assert (X - X).is_zero()
        assert ((X + Y) - Y) == X

    def test_equality_is_canonical(self):
        a = (X + Y) * (X - Y)
        b = X * X - Y * Y
        assert a == b
        assert hash(a) == hash(b)

    def test_idempotent_under_rebuild(self):
        p = X * X - Y.scale(3) + Poly.const(7)
        rebuilt = Poly(p.terms)
        assert rebuilt == p
        assert (p + Poly.zero()) == p


@st.composite
def polys(draw):
    vs = ["x", "y", "z"]
    n_terms = draw(st.integers(0, 5))
    p = Poly.zero()
    for _ in range(n_terms):
        coeff = Fraction(draw(st.integers(-4, 4)), draw(st.sampled_from([1, 2, 3])))
        mono = Poly.const(coeff)
        for v in draw(st.lists(st.sampled_from(vs), max_size=3)):
            mono = mono * Poly.var(v)
        p = p + mono
    return p


@st.composite
def substitutions(draw):
    out = {}
    for v in ["x", "y", "z"]:
        if draw(st.booleans()):
            out[v] = draw(polys())
    return out


class TestSubstitution:
    def test_guard_atom_example(self):
        atoms = atoms_from_relation(Y, ">", Poly.zero())
        substituted = atoms[0].subst({"y": Y - X})
        assert substituted == atoms_from_relation(Y - X, ">", Poly.zero())[0]

    def test_identity(self):
        p = X * Y - Y.scale(2)
        assert apply_subst(p, {}) == p

    def test_into_inequality(self):
        atom = atoms_from_relation(X, ">=", Poly.zero())[0]
        assert atom.subst({"x": X - Y}) == \
            atoms_from_relation(X - Y, ">=", Poly.zero())[0]

    @settings(max_examples=60, deadline=None)
    @given(polys(), substitutions(), st.integers(-3, 3), st.integers(-3, 3),
           st.integers(-3, 3))
    def test_substitution_commutes_with_evaluation(self, p, s, a, b, c):
        v = {"x": a, "y": b, "z": c}
        composed = {name: poly.eval(v) for name, poly in s.items()}
        v_after = dict(v)
        v_after.update(composed)
        assert p.subst(s).eval(v) == p.eval(v_after)


class TestComposeUpdates:
    def test_alternating_loop_squares_to_plain_descent(self):
        u = UpdateMap.of({"x": -X, "y": Y - ONE})
        uu = u.compose(u)
        assert uu == UpdateMap.of({"y": Y - Poly.const(2)})

    def test_identity_is_neutral(self):
        u = UpdateMap.of({"x": X - Y})
        assert u.compose(UpdateMap.identity()) == u
        assert UpdateMap.identity().compose(u) == u

    def test_const_reset_squares(self):
        u = UpdateMap.of({"x": X - ONE, "y": Poly.const(2), "z": Y})
        uu = u.compose(u)
        assert uu == UpdateMap.of({"x": X - Poly.const(2),
                                   "y": Poly.const(2), "z": Poly.const(2)})

    def test_matches_stepwise_interpretation(self):
        rng = random.Random(7)
        u1 = UpdateMap.of({"x": X + Y, "y": Y - ONE})
        u2 = UpdateMap.of({"x": X.scale(2), "y": X})
        composed = u1.compose(u2)
        for _ in range(100):
            v = {"x": rng.randint(-20, 20), "y": rng.randint(-20, 20)}
            mid = {n: u1.get(n).eval(v) for n in v}
            end = {n: u2.get(n).eval(mid) for n in v}
            assert all(composed.get(n).eval(v) == end[n] for n in v)


class TestIntegerValued:
    def test_half_square_minus_half(self):
        assert is_integer_valued(K.pow(2).scale(HALF) - K.scale(HALF))

    def test_half_k_is_not(self):
        assert not is_integer_valued(K.scale(HALF))

    def test_integer_coefficients_always_are(self):
        assert is_integer_valued(X * X * Y - Y.scale(3) + Poly.const(11))

    def test_quadratic_descent_form(self):
        assert is_integer_valued(quadratic_descent())

    def test_agrees_with_brute_force_on_grid(self):
        rng = random.Random(13)
        vs = ["x", "y"]
        for _ in range(60):
            p = Poly.zero()
            for _ in range(rng.randint(0, 4)):
                c = Fraction(rng.randint(-4, 4), rng.choice([1, 2, 6]))
                mono = Poly.const(c)
                for v in rng.choices(vs, k=rng.randint(0, 3)):
                    mono = mono * Poly.var(v)
                p = p + mono
            brute = all(
                p.eval({"x": a, "y": b}).denominator == 1
                for a in range(-3, 4) for b in range(-3, 4))
            assert is_integer_valued(p) == brute, str(p)


class TestAtomsAndConstraints:
    def test_strict_tightens_over_integers(self):
        (atom,) = atoms_from_relation(X, ">", Poly.zero())
        assert atom.poly == X - ONE

    def test_equality_splits(self):
        atoms = atoms_from_relation(X, "=", Y)
        assert len(atoms) == 2
        assert atoms[0].poly == X - Y
        assert atoms[1].poly == Y - X

    def test_rational_coefficients_cleared(self):
        (atom,) = atoms_from_relation(X.scale(HALF) + Y.scale(Fraction(1, 3)),
                                      ">=", Poly.zero())
        assert all(c.denominator == 1 for _, c in atom.poly.terms)
        assert atom.poly == X.scale(3) + Y.scale(2)

    def test_negation_over_integers(self):
        (atom,) = atoms_from_relation(X, ">=", Poly.zero())
        assert atom.negation().poly == -X - ONE

    def test_simplified_merges_same_body(self):
        c = C(gt("x"), gt(X - ONE))  # x >= 1 and x >= 2
        merged = c.simplified()
        assert len(merged.atoms) == 1
        assert merged.atoms[0].poly == X - Poly.const(2)

    def test_simplified_drops_trivial_and_duplicates(self):
        c = C(ge(ONE), ge("x"), ge("x"))
        assert c.simplified() == C(ge("x"))

    def test_simplified_keeps_contradiction_visible(self):
        c = C(ge(Poly.const(-1)))
        assert len(c.simplified().atoms) == 1

    def test_order_preserved(self):
        c = C(ge("y"), ge("x"))
        assert [str(a.poly) for a in c] == ["y", "x"]


class TestSummation:
    def test_arithmetic_series(self):
        q = Poly.var("i")
        s = sum_over_range(q, "i", "k")
        assert s == K.pow(2).scale(HALF) - K.scale(HALF)

    def test_with_free_variables(self):
        q = Y + Poly.var("i")
        s = sum_over_range(q, "i", "k")
        assert s == Y * K + K.pow(2).scale(HALF) - K.scale(HALF)

    def test_against_explicit_sums(self):
        rng = random.Random(5)
        for _ in range(25):
            q = Poly.zero()
            for d in range(rng.randint(1, 4)):
                q = q + Poly.var("i").pow(d).scale(rng.randint(-3, 3))
            s = sum_over_range(q, "i", "k")
            for n in range(0, 8):
                explicit = sum(q.eval({"i": i}) for i in range(n))
                assert s.eval({"k": n}) == explicit
