"""Simple-invariant synthesis for simple loops.

Builds linear templates over the relevant variables of each non-monotonic
guard atom, turns the invariance requirements into parameter constraints by
eliminating the universally quantified program variables with Farkas' lemma,
and solves the resulting weighted requirement set greedily over incremental
SMT.  Successful rounds strengthen the loop's guard; atoms whose instantiated
template is not a local invariant additionally produce a split variant with
the negated template, so no behavior is lost.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .monotonicity import (GuardPartition, is_conditional_invariant,
                           partition_guard)
from .poly import Atom, Constraint, Poly, VarId, atoms_from_relation
from .processors import strengthen
from .program import Transition, Valuation
from .smt.formula import And, Formula, Or, TRUE, conj, disj, from_constraint
from .smt.solver import SAT, SolverProcess, check_valid_implication

PARAM_MARK = "!"  # parser identifiers cannot contain '!', so namespaces stay disjoint


class NotLinear(Exception):
    """An implication is not linear in the program variables."""


def is_parameter(name: VarId) -> bool:
    return name.startswith(("c!", "l!"))


@dataclass(frozen=True)
class Template:
    """Parametric inequality  sum_x c_x * x >= c  over some variable set."""

    coeffs: tuple[tuple[VarId, VarId], ...]  # (program var, parameter)
    const_param: VarId

    def parameters(self) -> list[VarId]:
        return [p for _, p in self.coeffs] + [self.const_param]

    def atom(self) -> Atom:
        p = Poly.zero()
        for v, c in self.coeffs:
            p = p + Poly.var(c) * Poly.var(v)
        return Atom(p - Poly.var(self.const_param))

    def instantiate(self, model: Valuation) -> Atom:
        p = Poly.zero()
        for v, c in self.coeffs:
            p = p + Poly.var(v).scale(model.get(c, 0))
        return Atom.geq_zero(p - Poly.const(model.get(self.const_param, 0)))


def relevant_vars(alpha: Transition, rho: Atom) -> set[VarId]:
    """Least variable set closed under guard-atom overlap and update images."""
    out = set(rho.variables())
    changed = True
    while changed:
        changed = False
        for other in alpha.guard.atoms:
            vs = other.variables()
            if vs & out and not vs <= out:
                out |= vs
                changed = True
        for x in list(out):
            img = alpha.update.get(x).variables()
            if not img <= out:
                out |= img
                changed = True
    return out


# ---------------------------------------------------------------------------
# Farkas elimination
# ---------------------------------------------------------------------------

class _Fresh:
    """Deterministic name supply for multipliers and parameters."""

    def __init__(self, prefix: str):
        self.prefix = prefix
        self.n = 0

    def __call__(self, hint: str = "") -> VarId:
        name = f"{self.prefix}!{self.n}" + (f"!{hint}" if hint else "")
        self.n += 1
        return name


def _linear_decomposition(atom: Atom, uvars: Sequence[VarId]):
    """Split `poly >= 0` into per-uvar coefficient polys and the rest."""
    if not atom.poly.is_linear_in(uvars):
        raise NotLinear(str(atom))
    coeffs = {x: atom.poly.coeff_in(x, 1) for x in uvars}
    rest = atom.poly
    for x in uvars:
        rest = rest - coeffs[x] * Poly.var(x)
    if set(rest.variables()) & set(uvars):
        raise NotLinear(str(atom))
    return coeffs, rest


def farkas_encode(premises: Sequence[Atom], conclusion: Atom,
                  uvars: Iterable[VarId], fresh: _Fresh) -> Formula:
    """Parameter constraint equivalent to Farkas-provability of the implication.

    Premises P_i(x) >= 0 imply Q(x) >= 0 whenever nonnegative multipliers
    combine the premises into a scaled conclusion, or the premises are
    infeasible.  Multipliers are integer solver variables; the conclusion is
    pre-scaled by a slack multiplier l0 >= 1 so integer multipliers lose no
    generality at small scales.  Sound (not complete) for validity over Z.
    """
    uvars = sorted(set(uvars))
    concl_coeffs, concl_rest = _linear_decomposition(conclusion, uvars)
    decomposed = [_linear_decomposition(p, uvars) for p in premises]

    if not premises:
        # Valid iff the conclusion holds for every x: all coefficients vanish
        # and the constant is nonnegative.
        parts: list[Atom] = []
        for x in uvars:
            parts.extend(atoms_from_relation(concl_coeffs[x], "=", Poly.zero()))
        parts.extend(atoms_from_relation(concl_rest, ">=", Poly.zero()))
        return conj(parts)

    def combination(require_conclusion: bool) -> Formula:
        lambdas = [Poly.var(fresh("m")) for _ in premises]
        parts: list[Atom] = []
        for lam in lambdas:
            parts.extend(atoms_from_relation(lam, ">=", Poly.zero()))
        if require_conclusion:
            l0 = Poly.var(fresh("s"))
            parts.extend(atoms_from_relation(l0, ">=", Poly.const(1)))
        else:
            l0 = Poly.zero()
        for x in uvars:
            lhs = Poly.zero()
            for lam, (coeffs, _) in zip(lambdas, decomposed):
                lhs = lhs + lam * coeffs[x]
            parts.extend(atoms_from_relation(lhs, "=", l0 * concl_coeffs[x]))
        # Constant row: the combined premise constant must not exceed the
        # (scaled) conclusion constant; for the infeasible-premise disjunct
        # it must itself certify a contradiction.
        acc = Poly.zero()
        for lam, (_, rest) in zip(lambdas, decomposed):
            acc = acc + lam * rest
        bound = l0 * concl_rest if require_conclusion else Poly.const(-1)
        parts.extend(atoms_from_relation(bound, ">=", acc))
        return conj(parts)

    return disj([combination(True), combination(False)])


def farkas_implication(premise: Constraint, conclusion: Constraint,
                       pvars: set[VarId], fresh: _Fresh) -> Formula:
    """Encode validity of a constraint implication, one conclusion atom at a time."""
    uvars = {v for v in premise.variables() | conclusion.variables()
             if v in pvars}
    encoded = [farkas_encode(premise.atoms, c, uvars, fresh)
               for c in conclusion.atoms]
    return conj(encoded) if encoded else TRUE


# ---------------------------------------------------------------------------
# Requirement construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SoftRequirement:
    formula: Formula
    weight: int
    label: str


@dataclass
class RequirementSet:
    hard: Formula
    softs: list[SoftRequirement]
    templates: list[tuple[Atom, Template]]  # (rho, its template), in guard order


def _loop_predecessors(alpha: Transition, transitions: Sequence[Transition]):
    """Non-loop transitions into alpha's location (the only ones considered)."""
    return [b for b in transitions
            if b.id != alpha.id and b.target == alpha.source
            and b.source != b.target]


def build_requirements(alpha: Transition, part: GuardPartition,
                       transitions: Sequence[Transition],
                       round_index: int = 0) -> RequirementSet:
    """Hard and soft parameter constraints for one inference round.

    Hard: the templates stay simple invariants together with phi_si, at least
    one non-monotonic atom becomes conditionally invariant or monotonically
    decreasing, and some predecessor keeps the strengthened loop applicable.
    Soft: locality per template (weight m+2, dominating everything else),
    per-atom progress (weight 1), and a recurrent-set preference (weight 1)
    when nothing is monotonically decreasing yet.
    """
    nm = list(part.phi_nm.atoms)
    m = len(nm)
    assert m > 0, "inference requires a non-monotonic remainder"
    fresh_param = _Fresh(f"c!{round_index}")
    fresh_mult = _Fresh(f"l!{round_index}")
    pvars = set(alpha.variables())
    for b in transitions:
        pvars |= b.variables()
    pvars = {v for v in pvars if not is_parameter(v)}

    templates: list[tuple[Atom, Template]] = []
    for j, rho in enumerate(nm):
        rvars = sorted(relevant_vars(alpha, rho))
        coeffs = tuple((v, f"c!{round_index}!{j}!{v}") for v in rvars)
        templates.append((rho, Template(coeffs, f"c!{round_index}!{j}")))

    tau_atoms = [t.atom() for _, t in templates]
    tau_all = Constraint(tuple(tau_atoms))
    upd = alpha.update

    # (tau-si): phi_si and all templates imply the updated templates.
    tau_si = farkas_implication(
        part.phi_si.conjoin(tau_all),
        Constraint(tuple(upd.apply_to_atom(a) for a in tau_atoms)),
        pvars, fresh_mult)

    # (some-ci) / (some-md): progress on at least one non-monotonic atom.
    some_parts: list[Formula] = []
    for rho in nm:
        some_parts.append(farkas_implication(
            alpha.guard.conjoin(tau_all),
            Constraint.of(upd.apply_to_atom(rho)), pvars, fresh_mult))
    for rho in nm:
        premise = part.phi_si.conjoin(tau_all).conjoin(
            upd.apply_to_constraint(part.phi_md.conjoin(Constraint.of(rho))))
        some_parts.append(farkas_implication(
            premise, Constraint.of(rho), pvars, fresh_mult))
    some = disj(some_parts)

    # (sat): some predecessor reaches the strengthened loop.
    preds = _loop_predecessors(alpha, transitions)
    sat_parts: list[Formula] = []
    for b in preds:
        atoms = list(b.guard.atoms)
        atoms += list(b.update.apply_to_constraint(alpha.guard).atoms)
        atoms += [b.update.apply_to_atom(a) for a in tau_atoms]
        sat_parts.append(from_constraint(Constraint(tuple(atoms))))
    sat = disj(sat_parts) if sat_parts else Or(())

    hard = conj([tau_si, some, sat])

    softs: list[SoftRequirement] = []
    for j, (rho, tpl) in enumerate(templates):
        li_parts = [farkas_implication(
            b.guard.conjoin(b.update.apply_to_constraint(alpha.guard)),
            Constraint.of(b.update.apply_to_atom(tpl.atom())),
            pvars, fresh_mult) for b in preds]
        softs.append(SoftRequirement(conj(li_parts) if li_parts else TRUE,
                                     m + 2, f"li[{j}]"))
    for j, (rho, tpl) in enumerate(templates):
        ci = farkas_implication(alpha.guard.conjoin(tau_all),
                                Constraint.of(upd.apply_to_atom(rho)),
                                pvars, fresh_mult)
        md = farkas_implication(
            part.phi_si.conjoin(tau_all).conjoin(
                upd.apply_to_constraint(part.phi_md.conjoin(Constraint.of(rho)))),
            Constraint.of(rho), pvars, fresh_mult)
        softs.append(SoftRequirement(disj([ci, md]), 1, f"progress[{j}]"))
    if not part.phi_md.atoms:
        nt = farkas_implication(
            alpha.guard.conjoin(tau_all),
            Constraint(tuple(upd.apply_to_atom(r) for r in nm)),
            pvars, fresh_mult)
        softs.append(SoftRequirement(nt, 1, "nt"))

    return RequirementSet(hard, softs, templates)


# ---------------------------------------------------------------------------
# Greedy Max-SMT
# ---------------------------------------------------------------------------

def greedy_max_smt(hard: Formula, softs: Sequence[SoftRequirement],
                   solver: SolverProcess,
                   minimize_params: Sequence[VarId] = (),
                   prefer_zero: Sequence[VarId] = ()) -> Optional[Valuation]:
    """Assert the hard constraint, then keep soft constraints greedily.

    Softs are tried in descending weight (stable on construction order); each
    one is kept only if the stack stays satisfiable.  Not provably optimal by
    design.  Returns a parameter model, or None when the hard part fails.

    Two cosmetic refinements run after the greedy phase (results never depend
    on them, they only normalize the model): parameters in `prefer_zero` are
    pinned to 0 when possible, and parameters in `minimize_params` are boxed
    into the smallest feasible power-of-two range.
    """
    with solver.session() as s:
        s.add(hard)
        if s.check() != SAT:
            return None
        for soft in sorted(softs, key=lambda r: -r.weight):
            s.push()
            s.add(soft.formula)
            if s.check() != SAT:
                s.pop()
        verdict = s.check_with_model()
        if not verdict.is_sat:  # pragma: no cover - stack was just satisfiable
            return None
        model = verdict.model
        if prefer_zero:
            s.push()
            zeros = [a for p in prefer_zero
                     for a in atoms_from_relation(Poly.var(p), "=", Poly.zero())]
            s.add(conj(zeros))
            pinned = s.check_with_model()
            if pinned.is_sat:
                model = pinned.model
            else:
                s.pop()
        for bound in (1, 2, 4):
            s.push()
            box: list[Atom] = []
            for p in minimize_params:
                box.extend(atoms_from_relation(Poly.var(p), "<=", Poly.const(bound)))
                box.extend(atoms_from_relation(Poly.var(p), ">=", Poly.const(-bound)))
            s.add(conj(box) if box else TRUE)
            small = s.check_with_model()
            if small.is_sat:
                model = small.model
                break
            s.pop()
        return model


# ---------------------------------------------------------------------------
# Local invariants and the main loop
# ---------------------------------------------------------------------------

def is_local_invariant(alpha: Transition, phi: Constraint,
                       transitions: Sequence[Transition],
                       solver: SolverProcess) -> bool:
    """Conditional invariance plus initiation from every non-loop predecessor."""
    if not is_conditional_invariant(alpha, phi, solver):
        return False
    for b in _loop_predecessors(alpha, transitions):
        premise = b.guard.conjoin(b.update.apply_to_constraint(alpha.guard))
        conclusion = b.update.apply_to_constraint(phi)
        if check_valid_implication(premise, conclusion, solver) is not True:
            return False
    return True


def deduce_invariants(alpha: Transition, transitions: Sequence[Transition],
                      solver: SolverProcess) -> list[Transition]:
    """Strengthened variants of a simple loop, per the invariant-inference loop.

    Returns an empty list when the guard is already monotonic, when the loop
    is not linear in the program variables, or when the very first solver call
    fails; otherwise the strengthened loop plus any split variants.
    """
    part = partition_guard(alpha, solver)
    if not part.phi_nm.atoms:
        return []
    res: list[Transition] = []
    current = alpha
    round_index = 0
    while part.phi_nm.atoms:
        try:
            reqs = build_requirements(current, part, transitions, round_index)
        except NotLinear:
            return res
        params = [p for _, t in reqs.templates for p in t.parameters()]
        constants = [t.const_param for _, t in reqs.templates]
        model = greedy_max_smt(reqs.hard, reqs.softs, solver,
                               minimize_params=params, prefer_zero=constants)
        if model is None:
            return res
        instantiated = [(rho, tpl.instantiate(model))
                        for rho, tpl in reqs.templates]
        for rho, inv in instantiated:
            if inv.is_trivially_true():
                continue
            if not is_local_invariant(current, Constraint.of(inv),
                                      transitions, solver):
                res.append(strengthen(
                    current, Constraint.of(inv.negation()), split=True))
        added = Constraint(tuple(inv for _, inv in instantiated
                                 if not inv.is_trivially_true()))
        current = strengthen(current, added)
        previous_nm = len(part.phi_nm.atoms)
        part = partition_guard(current, solver)
        if len(part.phi_nm.atoms) >= previous_nm:
            # Progress is guaranteed when the solver answers definitively;
            # bail out rather than loop when it cannot.
            break
        round_index += 1
    return [current] + res
