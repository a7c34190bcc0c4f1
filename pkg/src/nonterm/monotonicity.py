"""Conditional/simple invariance, monotonic decreasingness, and guard partitioning.

A simple loop's guard decomposes into four parts: atoms that are conditionally
invariant, the subset of those that are simple invariants, atoms monotonically
decreasing relative to the simple-invariant part, and the remainder, which is
what blocks acceleration and drives invariant inference.

All predicates are decided through the SMT backend; an `unknown` answer never
admits an atom anywhere (validity must be proven).
"""

from __future__ import annotations

from dataclasses import dataclass

from .poly import Atom, Constraint
from .program import Transition
from .smt.solver import SolverProcess, check_valid_implication


@dataclass(frozen=True)
class GuardPartition:
    phi_ci: Constraint  # conditionally invariant but not simple
    phi_si: Constraint  # simple invariants
    phi_md: Constraint  # monotonically decreasing for phi_si
    phi_nm: Constraint  # causes non-monotonicity

    def monotonic_part(self) -> Constraint:
        return self.phi_ci.conjoin(self.phi_si).conjoin(self.phi_md)

    def is_monotonic(self) -> bool:
        return not self.phi_nm.atoms


def is_conditional_invariant(t: Transition, phi: Constraint,
                             solver: SolverProcess) -> bool:
    """guard(t) and phi together imply phi after the update."""
    premise = t.guard.conjoin(phi)
    conclusion = t.update.apply_to_constraint(phi)
    return check_valid_implication(premise, conclusion, solver) is True


def is_simple_invariant(t: Transition, phi: Constraint,
                        solver: SolverProcess) -> bool:
    """phi alone implies phi after the update."""
    conclusion = t.update.apply_to_constraint(phi)
    return check_valid_implication(phi, conclusion, solver) is True


def is_monotonically_decreasing(t: Transition, phi_si: Constraint,
                                phi: Constraint, solver: SolverProcess) -> bool:
    """phi_si plus the updated phi imply phi (preservation backwards)."""
    premise = phi_si.conjoin(t.update.apply_to_constraint(phi))
    return check_valid_implication(premise, phi, solver) is True


def partition_guard(t: Transition, solver: SolverProcess) -> GuardPartition:
    """Greatest-fixpoint partition of a simple loop's guard.

    phi_i is computed pointwise (a guard subset conjoined with the guard is
    the guard, so conditional invariance of guard atoms reduces to per-atom
    checks); phi_si and phi_md are greatest fixpoints of pruning.  Atom order,
    and hence the result, is deterministic.
    """
    guard = t.guard
    phi_i = [rho for rho in guard.atoms
             if check_valid_implication(
                 guard, Constraint.of(t.update.apply_to_atom(rho)), solver) is True]

    si = list(phi_i)
    while True:
        current = Constraint(tuple(si))
        kept = [rho for rho in si
                if check_valid_implication(
                    current, Constraint.of(t.update.apply_to_atom(rho)), solver) is True]
        if kept == si:
            break
        si = kept
    phi_si = Constraint(tuple(si))

    md = [rho for rho in guard.atoms if rho not in phi_i]
    while True:
        premise = phi_si.conjoin(
            t.update.apply_to_constraint(Constraint(tuple(md))))
        kept = [rho for rho in md
                if check_valid_implication(premise, Constraint.of(rho), solver) is True]
        if kept == md:
            break
        md = kept
    phi_md = Constraint(tuple(md))

    in_si = list(phi_si.atoms)
    ci_atoms = []
    for rho in phi_i:
        if rho in in_si:
            in_si.remove(rho)
        else:
            ci_atoms.append(rho)
    phi_ci = Constraint(tuple(ci_atoms))

    leftovers = list(phi_ci.atoms) + list(phi_si.atoms) + list(phi_md.atoms)
    nm_atoms = []
    for rho in guard.atoms:
        if rho in leftovers:
            leftovers.remove(rho)
        else:
            nm_atoms.append(rho)
    phi_nm = Constraint(tuple(nm_atoms))

    return GuardPartition(phi_ci, phi_si, phi_md, phi_nm)
