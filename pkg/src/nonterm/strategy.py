"""The simplification loop: prune, eliminate simple loops, chain, eliminate
locations, and finally extract and validate a witness.

Simple loops are removed one at a time (FIFO by id).  Each is first
preprocessed by the chaining heuristics, then exactly one of the processors
applies: the loop becomes a sink transition (recurrent set or fixpoint), an
accelerated transition, or a set of strengthened variants that re-enter the
queue.  Eliminated loops are chained onto their non-loop predecessors; once no
simple loops remain, one location is eliminated per round, so the program
shrinks to transitions out of the start symbol only.

A `NO` verdict is only emitted after the interpreter has replayed the
complete proof trace from the witness configuration.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from . import inference, processors
from .monotonicity import partition_guard
from .oracle import ReplayPlan, expand_trace, validate_witness, BadModel
from .poly import Constraint, Poly, atoms_from_relation
from .program import (Configuration, Program, Transition, Valuation,
                      rename_apart, transition_by_id)
from .recurrence import Unsolvable, solve_update
from .smt.solver import (SAT, UNSAT, SolverConfig, SolverProcess,
                         SolverUnavailable, check_sat, shared_solver)

COUNTER_SCHEDULE = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64)


@dataclass
class ProverConfig:
    timeout_s: float = 60.0
    smt_timeout_ms: int = 2000
    strengthen_budget: int = 3
    validate_steps: int = 1000
    seed: int = 0
    solver_command: Optional[str] = None


@dataclass
class Verdict:
    status: str  # "NO" or "MAYBE"
    reason: str = ""
    witness: Optional[Configuration] = None
    model: Optional[Valuation] = None
    plan: Optional[ReplayPlan] = None
    sink_transition: Optional[Transition] = None
    proof_log: list[str] = field(default_factory=list)

    @property
    def proved(self) -> bool:
        return self.status == "NO"


class _Timeout(Exception):
    pass


class Prover:
    def __init__(self, program: Program, config: Optional[ProverConfig] = None,
                 solver: Optional[SolverProcess] = None):
        self.program = program
        self.config = config or ProverConfig()
        if solver is not None:
            self.solver = solver
        elif self.config.solver_command or self.config.smt_timeout_ms != 2000:
            self.solver = SolverProcess(_solver_config(self.config))
        else:
            self.solver = shared_solver()
        self.deadline = 0.0
        self.log: list[str] = []
        self._counter_names = self._counter_name_source()

    # -- plumbing ------------------------------------------------------------

    def _counter_name_source(self):
        taken = self.program.variables()
        def names():
            for i in itertools.count():
                name = "k" if i == 0 else f"k!{i}"
                if name not in taken:
                    yield name
        return names()

    def _fresh_counter(self) -> str:
        return next(self._counter_names)

    def _check_time(self):
        if time.monotonic() > self.deadline:
            raise _Timeout()

    def _say(self, message: str):
        self.log.append(message)

    def chained(self, a: Transition, b: Transition) -> Transition:
        b2 = rename_apart(b, a.variables())
        return processors.chain(a, b2)

    # -- Algorithm steps -------------------------------------------------------

    def prune(self, transitions: list[Transition]) -> list[Transition]:
        """Drop transitions from unreachable sources or with unsat guards."""
        prog = self.program.with_transitions(transitions)
        reachable = prog.reachable_symbols()
        kept = []
        for t in transitions:
            if t.source not in reachable:
                self._say(f"prune (unreachable {t.source}): t{t.id}")
                continue
            if check_sat(t.guard, self.solver).is_unsat:
                self._say(f"prune (unsat guard): t{t.id}")
                continue
            kept.append(t)
        return kept

    def preprocess_simple_loop(self, alpha: Transition) -> Transition:
        """Self-chain for sign alternation, then while it stabilizes variables."""
        self._check_time()
        if processors.sign_alternating_var(alpha) is not None:
            alpha = self.chained(alpha, alpha)
            self._say(f"sign-alternation self-chain -> t{alpha.id}")
        orig = alpha
        while True:
            size = len(processors.unstable_vars(alpha))
            if size == 0:
                break
            candidate = self.chained(alpha, orig)
            if len(processors.unstable_vars(candidate)) < size:
                alpha = candidate
                self._say(f"stabilizing self-chain -> t{alpha.id}")
            else:
                break
        return alpha

    def eliminate_simple_loop(self, alpha: Transition,
                              others: Sequence[Transition]) \
            -> tuple[list[Transition], list[Transition]]:
        """Returns (surviving predecessor chains, variants to re-queue).

        Branch order: recurrent set of the loop, recurrent set of its
        self-chain, fixpoint, acceleration, invariant inference.  A branch
        whose result dies immediately (every predecessor chain has an
        unsatisfiable guard) is treated as inapplicable and the next branch is
        tried; otherwise the later branches (and in particular the inference
        route that the fixpoint check would shadow) could never rescue loops
        whose special-case region is unreachable.
        """
        self._check_time()
        sink = self.program.sink

        def commit(result: Transition, label: str) -> Optional[list[Transition]]:
            self._say(f"{label}: t{alpha.id} -> t{result.id}")
            chains = self.chain_with_predecessors(result, others)
            if chains is None:
                self._say(f"  no satisfiable predecessor chain for "
                          f"t{result.id}; trying further processors")
            return chains

        try:
            chains = commit(processors.make_nonterm(alpha, self.solver, sink),
                            "recurrent set")
            if chains is not None:
                return chains, []
        except processors.Inapplicable:
            pass
        self._check_time()
        try:
            twice = self.chained(alpha, alpha)
            chains = commit(processors.make_nonterm(twice, self.solver, sink),
                            "recurrent set of self-chain")
            if chains is not None:
                return chains, []
        except processors.Inapplicable:
            pass
        self._check_time()
        try:
            chains = commit(processors.make_fixpoint(alpha, self.solver, sink),
                            "fixpoint")
            if chains is not None:
                return chains, []
        except processors.Inapplicable:
            pass
        self._check_time()
        part = partition_guard(alpha, self.solver)
        if part.is_monotonic():
            try:
                cf = solve_update(alpha.update, alpha.args, self._fresh_counter())
                result = processors.accelerate(alpha, part, cf)
                chains = commit(result, "accelerate")
                if chains is not None:
                    return chains, []
            except (Unsolvable, processors.Inapplicable) as exc:
                self._say(f"acceleration failed for t{alpha.id}: {exc}")
        if alpha.deduce_depth >= self.config.strengthen_budget:
            self._say(f"strengthen budget exhausted for t{alpha.id}; dropped")
            return [], []
        variants = inference.deduce_invariants(alpha, others, self.solver)
        if not variants:
            self._say(f"no invariants deducible for t{alpha.id}; dropped")
            return [], []
        bumped = [replace(v, deduce_depth=alpha.deduce_depth + 1) for v in variants]
        self._say("invariants split t{} into {}".format(
            alpha.id, ", ".join(f"t{v.id}" for v in bumped)))
        return [], bumped

    def chain_with_predecessors(self, result: Transition,
                                transitions: Sequence[Transition]) \
            -> Optional[list[Transition]]:
        """Chain a processed loop onto its non-loop predecessors.

        Returns the satisfiable compositions, or None when predecessors exist
        but every composition is unsatisfiable (the caller then treats the
        producing branch as inapplicable).  No predecessors yields [].
        """
        out = []
        had_predecessor = False
        for beta in transitions:
            if beta.source != beta.target and beta.target == result.source:
                had_predecessor = True
                c = self.chained(beta, result)
                if check_sat(c.guard, self.solver).is_unsat:
                    self._say(f"chain predecessor: t{beta.id} o t{result.id} "
                              f"-> t{c.id} (unsat, dropped)")
                    continue
                self._say(f"chain predecessor: t{beta.id} o t{result.id} -> t{c.id}")
                out.append(c)
        if had_predecessor and not out:
            return None
        return out

    def eliminate_location(self, transitions: list[Transition]) -> Optional[list[Transition]]:
        """Chain through one location and drop it; None when none qualifies."""
        sources = {}
        for t in transitions:
            sources.setdefault(t.source, []).append(t)
        targets = {}
        for t in transitions:
            targets.setdefault(t.target, []).append(t)
        candidates = []
        for sym in sorted(set(sources) & set(targets)):
            if sym in (self.program.start, self.program.sink):
                continue
            ins, outs = targets[sym], sources[sym]
            candidates.append((len(ins) * len(outs), sym))
        if not candidates:
            return None
        _, sym = min(candidates)
        ins, outs = targets[sym], sources[sym]
        self._say(f"eliminate location {sym} "
                  f"({len(ins)} in x {len(outs)} out)")
        kept = [t for t in transitions if sym not in (t.source, t.target)]
        for a in ins:
            for b in outs:
                self._check_time()
                c = self.chained(a, b)
                if check_sat(c.guard, self.solver).is_unsat:
                    self._say(f"  drop unsat chain t{c.id}")
                    continue
                self._say(f"  t{a.id} o t{b.id} -> t{c.id}")
                kept.append(c)
        return kept

    # -- witness extraction ----------------------------------------------------

    def find_witness(self, transitions: Sequence[Transition]) -> Verdict:
        sinks = [t for t in transitions if t.target == self.program.sink]
        if not sinks:
            return Verdict("MAYBE", reason="no transition to the sink survived",
                           proof_log=self.log)
        reasons = []
        for t in sorted(sinks, key=lambda t: t.id):
            self._check_time()
            verdicts = [check_sat(t.guard, self.solver)]
            if verdicts[0].status == "unknown" and t.temp_vars:
                # Counter enumeration: retry with every counter pinned.
                for value in COUNTER_SCHEDULE:
                    pin = list(t.guard.atoms)
                    for v in t.temp_vars:
                        pin += atoms_from_relation(Poly.var(v), "=", Poly.const(value))
                    pinned = check_sat(Constraint(tuple(pin)), self.solver)
                    if pinned.is_sat:
                        verdicts.append(pinned)
                        break
            verdict = next((v for v in verdicts if v.is_sat), None)
            if verdict is None:
                reasons.append(f"t{t.id}: guard {verdicts[0].status}")
                continue
            model = dict(verdict.model)
            witness = Configuration(
                t.source, tuple(model.get(x, 0) for x in t.args))
            try:
                plan = expand_trace(t, model)
            except BadModel as exc:
                reasons.append(f"t{t.id}: {exc}")
                continue
            result = validate_witness(witness, plan, self.config.validate_steps)
            if result.ok:
                self._say(f"witness {witness} validated via t{t.id} "
                          f"({result.steps_run} steps replayed)")
                return Verdict("NO", witness=witness, model=model, plan=plan,
                               sink_transition=t, proof_log=self.log)
            reasons.append(f"t{t.id}: witness {witness} failed validation: "
                           f"{result.diagnostic}")
            self._say(reasons[-1])
        return Verdict("MAYBE", reason="; ".join(reasons) or "no usable sink transition",
                       proof_log=self.log)

    # -- the outer loop ----------------------------------------------------------

    def prove(self) -> Verdict:
        self.deadline = time.monotonic() + self.config.timeout_s
        transitions = list(self.program.transitions)
        try:
            while not all(t.source == self.program.start for t in transitions):
                self._check_time()
                transitions = self.prune(transitions)
                if all(t.source == self.program.start for t in transitions):
                    break
                locations_before = {t.source for t in transitions if
                                    t.source != self.program.start}
                seen_ids = {t.id for t in transitions}
                new_chained: list[Transition] = []
                queue = sorted((t for t in transitions if t.is_simple_loop()),
                               key=lambda t: t.id)
                while queue:
                    alpha = queue.pop(0)
                    transitions.remove(alpha)
                    alpha = self.preprocess_simple_loop(alpha)
                    chains, requeue = self.eliminate_simple_loop(alpha, transitions)
                    new_chained.extend(chains)
                    for v in requeue:
                        transitions.append(v)
                        queue.append(v)
                    queue.sort(key=lambda t: t.id)
                transitions.extend(new_chained)
                transitions = [t for t in transitions
                               if not check_sat(t.guard, self.solver).is_unsat]
                eliminated = self.eliminate_location(transitions)
                if eliminated is not None:
                    transitions = eliminated
                    locations_after = {t.source for t in eliminated
                                       if t.source != self.program.start}
                    assert len(locations_after) < len(locations_before) or \
                        not locations_before, "location elimination must shrink"
                elif {t.id for t in transitions} == seen_ids:
                    return Verdict("MAYBE", reason="no further simplification possible",
                                   proof_log=self.log)
            self._say("program simplified; searching for a witness")
            return self.find_witness(transitions)
        except _Timeout:
            return Verdict("MAYBE", reason="timeout", proof_log=self.log)
        except SolverUnavailable as exc:
            return Verdict("MAYBE", reason=f"solver unavailable: {exc}",
                           proof_log=self.log)


def _solver_config(config: ProverConfig) -> SolverConfig:
    from .smt.solver import default_solver_config
    return default_solver_config(config.smt_timeout_ms, config.solver_command)


def prove_nontermination(program: Program,
                         config: Optional[ProverConfig] = None,
                         solver: Optional[SolverProcess] = None) -> Verdict:
    return Prover(program, config, solver).prove()
