"""The safe-and-sound program transformations.

Accelerate, Chain, Nonterm, Fixpoint, and Strengthen each build one new
transition from existing ones and never mutate anything; the simplification
strategy decides what enters the program.  The chaining-heuristic predicates
(sign alternation, unstable variables) also live here.
"""

from __future__ import annotations

from typing import Optional

from .monotonicity import GuardPartition, is_simple_invariant
from .poly import Atom, Constraint, Poly, UpdateMap, VarId, atoms_from_relation
from .program import (Accelerated, Chained, FixpointOf, NontermOf, Strengthened,
                      Transition, fresh_transition_id, rename_apart)
from .recurrence import ClosedForm
from .smt.solver import SolverProcess, check_sat


class Inapplicable(Exception):
    """The processor's side conditions do not hold for this input."""


def chain(alpha: Transition, beta: Transition) -> Transition:
    """alpha followed by beta, as one transition.

    Preconditions: target(alpha) = source(beta), both transitions use the
    canonical argument list, and beta's temp variables have already been
    renamed apart (see `chained` in the strategy, which does the renaming).
    """
    if alpha.target != beta.source:
        raise Inapplicable(
            f"cannot chain: t{alpha.id} targets {alpha.target}, "
            f"t{beta.id} starts at {beta.source}")
    assert alpha.args == beta.args, "argument lists must be canonical"
    assert not (set(alpha.temp_vars) & set(beta.temp_vars)), \
        "temp variables must be renamed apart before chaining"
    subst = alpha.update.as_dict()
    guard = alpha.guard.conjoin(beta.guard.subst(subst)).simplified()
    update = alpha.update.compose(beta.update)
    return Transition(
        source=alpha.source, args=alpha.args, guard=guard,
        update=update, target=beta.target,
        temp_vars=alpha.temp_vars + beta.temp_vars,
        deduce_depth=max(alpha.deduce_depth, beta.deduce_depth),
        provenance=Chained(alpha.id, beta.id))


def accelerate(alpha: Transition, part: GuardPartition, cf: ClosedForm) -> Transition:
    """Capture k >= 1 iterations of a simple loop with monotonic guard.

    The new guard keeps phi_ci and phi_si unshifted and adds the closed form
    of phi_md advanced to iteration k-1, plus k > 0.  Closed forms with
    exponential terms never enter transitions (guards and updates stay
    polynomial), so those loops report Inapplicable here.
    """
    if not alpha.is_simple_loop():
        raise Inapplicable("acceleration needs a simple loop")
    if part.phi_nm.atoms:
        raise Inapplicable("guard is not monotonic")
    if cf.has_exponentials():
        raise Inapplicable("closed form contains exponential terms")
    k = cf.counter
    mu = cf.substitution()
    dec = {k: Poly.var(k) - Poly.const(1)}
    md_shifted = part.phi_md.subst(mu).subst(dec)
    guard = part.phi_ci.conjoin(part.phi_si).conjoin(md_shifted).conjoin(
        Constraint(tuple(atoms_from_relation(Poly.var(k), ">", Poly.zero()))))
    update = {x: mu[x] for x in alpha.args if x in mu}
    return Transition(
        source=alpha.source, args=alpha.args, guard=guard,
        update=UpdateMap.of(update), target=alpha.target,
        temp_vars=alpha.temp_vars + (k,),
        deduce_depth=alpha.deduce_depth,
        provenance=Accelerated(alpha.id, k))


def make_nonterm(alpha: Transition, solver: SolverProcess,
                 sink: str) -> Transition:
    """Replace a loop whose guard is a simple invariant by a sink transition."""
    if not alpha.is_simple_loop():
        raise Inapplicable("recurrent-set check needs a simple loop")
    if not is_simple_invariant(alpha, alpha.guard, solver):
        raise Inapplicable("guard is not a proven simple invariant")
    return Transition(
        source=alpha.source, args=alpha.args, guard=alpha.guard,
        update=UpdateMap.identity(), target=sink,
        temp_vars=alpha.temp_vars,
        deduce_depth=alpha.deduce_depth,
        provenance=NontermOf(alpha.id))


def make_fixpoint(alpha: Transition, solver: SolverProcess,
                  sink: str) -> Transition:
    """Sink transition for loops with a satisfiable fixpoint region."""
    if not alpha.is_simple_loop():
        raise Inapplicable("fixpoint check needs a simple loop")
    eq_atoms: list[Atom] = []
    for x in alpha.args:
        eq_atoms.extend(atoms_from_relation(Poly.var(x), "=", alpha.update.get(x)))
    guard = alpha.guard.conjoin(Constraint(tuple(eq_atoms))).simplified()
    if not check_sat(guard, solver).is_sat:
        raise Inapplicable("no satisfiable fixpoint")
    return Transition(
        source=alpha.source, args=alpha.args, guard=guard,
        update=UpdateMap.identity(), target=sink,
        temp_vars=alpha.temp_vars,
        deduce_depth=alpha.deduce_depth,
        provenance=FixpointOf(alpha.id))


def strengthen(alpha: Transition, phi: Constraint, split: bool = False) -> Transition:
    """Conjoin phi onto the guard (always sound; may produce an unsat guard)."""
    guard = alpha.guard.conjoin(phi).simplified()
    return Transition(
        source=alpha.source, args=alpha.args, guard=guard,
        update=alpha.update, target=alpha.target,
        temp_vars=alpha.temp_vars,
        deduce_depth=alpha.deduce_depth,
        provenance=Strengthened(alpha.id, phi.atoms, split))


# ---------------------------------------------------------------------------
# Chaining heuristics
# ---------------------------------------------------------------------------

def sign_alternating_var(alpha: Transition) -> Optional[VarId]:
    """First argument x with update(x) = c*x + t, c < 0, x not in t."""
    for x in alpha.args:
        rhs = alpha.update.get(x)
        if rhs.degree_in(x) != 1:
            continue
        c = rhs.coeff_in(x, 1)
        if not c.is_const() or c.const_value() >= 0:
            continue
        t = rhs - Poly.var(x).scale(c.const_value())
        if x not in t.variables():
            return x
    return None


def unstable_vars(alpha: Transition) -> set[VarId]:
    """Arguments whose update reads other variables but not themselves."""
    out = set()
    for x in alpha.args:
        vs = alpha.update.get(x).variables()
        if vs and x not in vs:
            out.add(x)
    return out
