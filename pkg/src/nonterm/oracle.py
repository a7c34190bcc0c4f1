"""Concrete semantics: the interpreter and everything that replays proofs.

This module is the artifact's ground truth.  It never consults the SMT solver
except to sample inputs for differential testing; witness validation is pure
arbitrary-precision arithmetic over the original transitions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .poly import Atom, Constraint, Poly, atoms_from_relation
from .program import (Accelerated, Chained, Configuration, FixpointOf,
                      NontermOf, Original, Renamed, Strengthened, Transition,
                      Valuation, transition_by_id)
from .smt.formula import conj, disj
from .smt.solver import SolverProcess


class ArityMismatch(ValueError):
    pass


class BadModel(ValueError):
    """A proof trace was expanded with an unusable model (e.g. a counter < 1)."""


STUCK = None  # step() returns None when the guard is violated


def step(config: Configuration, t: Transition,
         temps: Optional[Valuation] = None) -> Optional[Configuration]:
    """One evaluation step, or None (stuck) when the guard does not hold."""
    if t.source != config.symbol:
        raise ArityMismatch(
            f"transition t{t.id} starts at {t.source}, not {config.symbol}")
    if len(config.values) != len(t.args):
        raise ArityMismatch(f"configuration arity {len(config.values)} != "
                            f"{len(t.args)}")
    valuation: Valuation = dict(zip(t.args, config.values))
    if temps:
        valuation.update(temps)
    if not t.guard.holds(valuation):
        return STUCK
    values = []
    for x in t.args:
        v = t.update.get(x).eval(valuation)
        assert v.denominator == 1, f"non-integer step result for {x}: {v}"
        values.append(int(v))
    return Configuration(t.target, tuple(values))


# ---------------------------------------------------------------------------
# Proof-trace expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplayStep:
    transition_id: int
    temps: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class RecurrentLoop:
    body: tuple[ReplayStep, ...]
    guard_transition_id: int  # transition whose guard is the recurrent set
    temps: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class FixpointLoop:
    body: tuple[ReplayStep, ...]
    guard_transition_id: int
    temps: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class ReplayPlan:
    prefix: tuple[ReplayStep, ...]
    tail: Union[RecurrentLoop, FixpointLoop, None]


def expand_trace(t: Transition, model: Valuation) -> ReplayPlan:
    """Flatten a transition's provenance into concrete original steps.

    Accelerated nodes expand to model[k] copies of their base (recursively);
    renamings re-route temp-variable lookups into the final model's namespace.
    Counters below 1 raise BadModel.
    """

    def resolve(alias: dict[str, str], name: str) -> str:
        return alias.get(name, name)

    def temps_for(tr: Transition, alias: dict[str, str]) -> tuple[tuple[str, int], ...]:
        out = []
        for v in tr.temp_vars:
            key = resolve(alias, v)
            if key in model:
                out.append((v, model[key]))
        return tuple(out)

    def expand(tr: Transition, alias: dict[str, str]) \
            -> tuple[list[ReplayStep], Union[RecurrentLoop, FixpointLoop, None]]:
        prov = tr.provenance
        if isinstance(prov, Original):
            return [ReplayStep(tr.id, temps_for(tr, alias))], None
        if isinstance(prov, Renamed):
            base = transition_by_id(prov.base_id)
            inner = dict(alias)
            for old, new in prov.mapping:
                inner[old] = resolve(alias, new)
            return expand(base, inner)
        if isinstance(prov, Strengthened):
            return expand(transition_by_id(prov.base_id), alias)
        if isinstance(prov, Chained):
            first, tail1 = expand(transition_by_id(prov.first_id), alias)
            assert tail1 is None, "only the second leg of a chain may diverge"
            second, tail2 = expand(transition_by_id(prov.second_id), alias)
            return first + second, tail2
        if isinstance(prov, Accelerated):
            key = resolve(alias, prov.counter)
            if key not in model:
                raise BadModel(f"model does not value counter {key}")
            n = model[key]
            if n < 1:
                raise BadModel(f"counter {key} = {n} < 1")
            body, tail = expand(transition_by_id(prov.base_id), alias)
            assert tail is None, "acceleration bases are plain loops"
            return body * n, None
        if isinstance(prov, NontermOf):
            body, tail = expand(transition_by_id(prov.base_id), alias)
            assert tail is None
            return [], RecurrentLoop(tuple(body), tr.id, temps_for(tr, alias))
        if isinstance(prov, FixpointOf):
            body, tail = expand(transition_by_id(prov.base_id), alias)
            assert tail is None
            return [], FixpointLoop(tuple(body), tr.id, temps_for(tr, alias))
        raise TypeError(f"unknown provenance {prov!r}")

    prefix, tail = expand(t, {})
    return ReplayPlan(tuple(prefix), tail)


# ---------------------------------------------------------------------------
# Witness validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationResult:
    ok: bool
    steps_run: int
    diagnostic: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_witness(witness: Configuration, plan: ReplayPlan,
                     loop_steps: int = 1000) -> ValidationResult:
    """Replay the plan from the witness; no step may get stuck.

    The prefix must run through; a recurrent tail must keep its guard (and
    its body stepping) for `loop_steps` iterations, a fixpoint tail must map
    the configuration to itself.
    """
    config = witness
    count = 0
    for s in plan.prefix:
        t = transition_by_id(s.transition_id)
        nxt = step(config, t, dict(s.temps))
        if nxt is STUCK:
            return ValidationResult(
                False, count,
                f"stuck at step {count + 1}: t{t.id} from {config}")
        config = nxt
        count += 1
    if plan.tail is None:
        return ValidationResult(False, count, "plan has no diverging tail")

    guard_t = transition_by_id(plan.tail.guard_transition_id)
    tail_temps = dict(plan.tail.temps)

    def guard_holds(c: Configuration) -> bool:
        valuation = dict(zip(guard_t.args, c.values))
        valuation.update(tail_temps)
        return guard_t.guard.holds(valuation)

    if isinstance(plan.tail, FixpointLoop):
        if not guard_holds(config):
            return ValidationResult(False, count, f"fixpoint guard fails at {config}")
        current = config
        for s in plan.tail.body:
            t = transition_by_id(s.transition_id)
            nxt = step(current, t, dict(s.temps))
            if nxt is STUCK:
                return ValidationResult(False, count, f"fixpoint body stuck at {current}")
            current = nxt
            count += 1
        if (current.symbol, current.values) != (config.symbol, config.values):
            return ValidationResult(
                False, count, f"not a fixpoint: {config} steps to {current}")
        return ValidationResult(True, count)

    for i in range(loop_steps):
        if not guard_holds(config):
            return ValidationResult(
                False, count, f"recurrent guard fails after {i} iterations at {config}")
        for s in plan.tail.body:
            t = transition_by_id(s.transition_id)
            nxt = step(config, t, dict(s.temps))
            if nxt is STUCK:
                return ValidationResult(
                    False, count, f"recurrent body stuck at {config} (iteration {i})")
            config = nxt
            count += 1
    return ValidationResult(True, count)


# ---------------------------------------------------------------------------
# Differential acceleration checking
# ---------------------------------------------------------------------------

@dataclass
class DifferentialReport:
    trials: int
    passed: int
    failures: list[str]

    @property
    def all_passed(self) -> bool:
        return self.trials > 0 and self.passed == self.trials


def differential_accelerate_check(alpha: Transition, accelerated: Transition,
                                  solver: SolverProcess, trials: int = 50,
                                  k_max: int = 20,
                                  rng: Optional[random.Random] = None) -> DifferentialReport:
    """Sample models of the accelerated guard and replay the base loop.

    For each model with counter value n <= k_max, the base loop must step n
    times without getting stuck and land exactly on the accelerated
    transition's right-hand side.
    """
    assert isinstance(accelerated.provenance, Accelerated)
    k = accelerated.provenance.counter
    rng = rng or random.Random(0)
    report = DifferentialReport(0, 0, [])
    with solver.session() as s:
        s.add(conj(list(accelerated.guard.atoms)
                   + atoms_from_relation(Poly.var(k), "<=", Poly.const(k_max))))
        for _ in range(trials):
            # Randomized box offsets diversify the sampled models.
            s.push()
            offsets = []
            for x in rng.sample(list(alpha.args), len(alpha.args)):
                if rng.random() < 0.5:
                    c = rng.randint(-8, 8)
                    rel = rng.choice((">=", "<="))
                    offsets.extend(atoms_from_relation(Poly.var(x), rel, Poly.const(c)))
            if offsets:
                s.add(conj(offsets))
            verdict = s.check_with_model()
            s.pop()
            if not verdict.is_sat:
                verdict = s.check_with_model()
            if not verdict.is_sat:
                break
            model = verdict.model
            report.trials += 1
            ok, diag = _replay_one(alpha, accelerated, k, model)
            if ok:
                report.passed += 1
            else:
                report.failures.append(diag)
            # Block this model so the next trial sees a different one.
            block = []
            for x in sorted(set(alpha.args) | {k}):
                v = model.get(x, 0)
                block.extend(atoms_from_relation(Poly.var(x), ">=", Poly.const(v + 1))
                             + atoms_from_relation(Poly.var(x), "<=", Poly.const(v - 1)))
            s.add(disj(block))
    return report


def _replay_one(alpha: Transition, accelerated: Transition, k: str,
                model: Valuation) -> tuple[bool, str]:
    n = model.get(k, 0)
    if n < 1:
        return False, f"model has counter {k} = {n}"
    base_vals = {x: model.get(x, 0) for x in alpha.args}
    config = Configuration(alpha.source, tuple(base_vals[x] for x in alpha.args))
    temps = {v: model[v] for v in alpha.temp_vars if v in model}
    for i in range(n):
        nxt = step(config, alpha, temps)
        if nxt is STUCK:
            return False, f"base loop stuck at iteration {i} from {config}"
        config = nxt
    full = dict(model)
    for x in alpha.args:
        full.setdefault(x, 0)
    expected = []
    for x in accelerated.args:
        v = accelerated.update.get(x).eval(full)
        if v.denominator != 1:
            return False, f"accelerated rhs for {x} is not integral: {v}"
        expected.append(int(v))
    if tuple(expected) != config.values:
        return False, (f"endpoint mismatch: replay gives {config.values}, "
                       f"accelerated rhs gives {tuple(expected)}")
    return True, ""
