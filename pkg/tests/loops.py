"""Shared program builders for the tests.

The two-phase program (a decreasing loop feeding a growing loop) and the four
special loop shapes (zero-reset, sign-alternating, constant-reset, and
argument-swapping) come up throughout the suite; building them in one place
keeps the tests short.
"""

from nonterm.poly import Constraint, Poly, atoms_from_relation
from nonterm.program import Program, Transition, make_transition


def ge(lhs, rhs=0):
    return atoms_from_relation(_p(lhs), ">=", _p(rhs))


def gt(lhs, rhs=0):
    return atoms_from_relation(_p(lhs), ">", _p(rhs))


def lt(lhs, rhs=0):
    return atoms_from_relation(_p(lhs), "<", _p(rhs))


def le(lhs, rhs=0):
    return atoms_from_relation(_p(lhs), "<=", _p(rhs))


def eq(lhs, rhs=0):
    return atoms_from_relation(_p(lhs), "=", _p(rhs))


def _p(v):
    if isinstance(v, Poly):
        return v
    if isinstance(v, str):
        return Poly.var(v)
    return Poly.const(v)


def C(*atom_groups) -> Constraint:
    atoms = []
    for group in atom_groups:
        atoms.extend(group)
    return Constraint(tuple(atoms))


X, Y, Z = Poly.var("x"), Poly.var("y"), Poly.var("z")
ONE = Poly.const(1)


def two_phase_transitions() -> list[Transition]:
    """start -> f; f counts x down by a growing y; then g grows y forever."""
    t1 = make_transition("start", ("x", "y"), C(), {}, "f", rule_index=1)
    t2 = make_transition("f", ("x", "y"), C(ge("x")),
                         {"x": X - Y, "y": Y + ONE}, "f", rule_index=2)
    t3 = make_transition("f", ("x", "y"), C(lt("x")), {}, "g", rule_index=3)
    t4 = make_transition("g", ("x", "y"), C(gt("y")),
                         {"y": Y - X}, "g", rule_index=4)
    return [t1, t2, t3, t4]


def two_phase_program() -> Program:
    return Program(tuple(two_phase_transitions()), "start")


def zero_reset_loop() -> Transition:
    """f(x, y) -> f(0, y - x) while y > 0."""
    return make_transition("f", ("x", "y"), C(gt("y")),
                           {"x": Poly.zero(), "y": Y - X}, "f")


def alternating_loop() -> Transition:
    """f(x, y) -> f(-x, y - 1) while y > x."""
    return make_transition("f", ("x", "y"), C(gt(Y - X)),
                           {"x": -X, "y": Y - ONE}, "f")


def const_reset_loop() -> Transition:
    """f(x, y, z) -> f(x - 1, 2, y) while x > 0."""
    return make_transition("f", ("x", "y", "z"), C(gt("x")),
                           {"x": X - ONE, "y": Poly.const(2), "z": Y}, "f")


def swap_loop() -> Transition:
    """f(x, y) -> f(y - 1, x - 1) while x > 0."""
    return make_transition("f", ("x", "y"), C(gt("x")),
                           {"x": Y - ONE, "y": X - ONE}, "f")
