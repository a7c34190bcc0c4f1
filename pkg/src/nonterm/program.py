"""Integer transition systems: transitions, programs, and concrete configurations.

A program is a finite set of guarded transitions between function symbols over
integer-valued argument variables.  All transitions in a program share one
canonical argument list (established by the parser), which is what makes
chaining a plain substitution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

from .poly import Atom, Constraint, Poly, UpdateMap, VarId

FunSym = str

# Valuations assign integers to variables; configurations are points in the
# reachable state space.
Valuation = dict[VarId, int]


@dataclass(frozen=True)
class Configuration:
    symbol: FunSym
    values: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.symbol}({', '.join(str(v) for v in self.values)})"


# ---------------------------------------------------------------------------
# Provenance
#
# Every derived transition records how it was built, down to original rule
# ids.  The oracle replays these recipes concretely, so each recipe carries
# exactly what replay needs (e.g. the counter variable of an acceleration).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Original:
    rule_index: int  # position in the input file, for readable traces


@dataclass(frozen=True)
class Renamed:
    base_id: int
    mapping: tuple[tuple[VarId, VarId], ...]  # old temp name -> fresh name


@dataclass(frozen=True)
class Chained:
    first_id: int
    second_id: int


@dataclass(frozen=True)
class Accelerated:
    base_id: int
    counter: VarId


@dataclass(frozen=True)
class NontermOf:
    base_id: int


@dataclass(frozen=True)
class FixpointOf:
    base_id: int


@dataclass(frozen=True)
class Strengthened:
    base_id: int
    added: tuple[Atom, ...]
    split: bool = False


Provenance = Original | Renamed | Chained | Accelerated | NontermOf | FixpointOf | Strengthened

_next_transition_id = itertools.count(1)

# Every transition ever constructed, by id.  Proof traces reference
# transitions through provenance recipes, and replay needs to resolve every
# intermediate (including ones that never entered a program).
_registry: dict[int, "Transition"] = {}


def fresh_transition_id() -> int:
    return next(_next_transition_id)


def transition_by_id(tid: int) -> "Transition":
    return _registry[tid]


@dataclass(frozen=True)
class Transition:
    """One guarded rule ``source(args) -> target(update(args)) [guard]``.

    `temp_vars` lists guard variables that are not arguments (acceleration
    counters); their values are chosen nondeterministically at each
    application.  Sink-targeting transitions carry an empty update.
    """

    source: FunSym
    args: tuple[VarId, ...]
    guard: Constraint
    update: UpdateMap
    target: FunSym
    provenance: Provenance
    temp_vars: tuple[VarId, ...] = ()
    deduce_depth: int = 0
    id: int = field(default_factory=fresh_transition_id)

    def __post_init__(self):
        assert len(set(self.args)) == len(self.args), "argument list not pairwise distinct"
        _registry[self.id] = self

    def is_simple_loop(self) -> bool:
        return self.source == self.target

    def variables(self) -> set[VarId]:
        return set(self.args) | self.guard.variables() | self.update.variables()

    def with_guard(self, guard: Constraint, provenance: Provenance,
                   temp_vars: Optional[tuple[VarId, ...]] = None) -> "Transition":
        return replace(
            self, guard=guard, provenance=provenance, id=fresh_transition_id(),
            temp_vars=self.temp_vars if temp_vars is None else temp_vars)

    def __str__(self) -> str:
        lhs = f"{self.source}({', '.join(self.args)})"
        if self.update.entries or self.target != self.source:
            rhs_terms = ", ".join(str(self.update.get(x)) for x in self.args)
            rhs = f"{self.target}({rhs_terms})"
        else:
            rhs = lhs
        guard = f" [{self.guard}]" if self.guard.atoms else ""
        return f"t{self.id}: {lhs} -> {rhs}{guard}"


def rename_apart(t: Transition, avoid: Iterable[VarId]) -> Transition:
    """Rename t's temp variables away from `avoid` (semantics unchanged).

    Arguments are never renamed; only variables outside the argument list can
    clash, per the canonical-argument convention.
    """
    avoid = set(avoid) | set(t.args)
    clashes = [v for v in t.temp_vars if v in avoid]
    if not clashes:
        return t
    taken = avoid | t.variables()
    mapping: dict[VarId, VarId] = {}
    for v in clashes:
        base = v.split("!", 1)[0]
        for i in itertools.count(1):
            candidate = f"{base}!{i}"
            if candidate not in taken:
                mapping[v] = candidate
                taken.add(candidate)
                break
    subst = {old: Poly.var(new) for old, new in mapping.items()}
    return replace(
        t,
        guard=t.guard.subst(subst),
        update=UpdateMap.of({v: p.subst(subst) for v, p in t.update.entries}),
        temp_vars=tuple(mapping.get(v, v) for v in t.temp_vars),
        provenance=Renamed(t.id, tuple(sorted(mapping.items()))),
        id=fresh_transition_id(),
    )


class IllFormedProgram(ValueError):
    pass


@dataclass(frozen=True)
class Program:
    """A finite transition set with a start symbol and a sink symbol.

    Invariants (checked): the start symbol never occurs as a target (the
    parser guarantees this by renaming), the sink has no outgoing transitions,
    and every transition uses the shared canonical argument list.
    """

    transitions: tuple[Transition, ...]
    start: FunSym
    sink: FunSym = "!sink"

    def __post_init__(self):
        args = None
        for t in self.transitions:
            if t.target == self.start:
                raise IllFormedProgram(f"start symbol {self.start} occurs as a target")
            if t.source == self.sink:
                raise IllFormedProgram("sink symbol has an outgoing transition")
            if args is None:
                args = t.args
            elif t.args != args:
                raise IllFormedProgram(
                    f"transition {t.id} breaks the canonical argument list")
            if set(t.args) & self.symbols():
                raise IllFormedProgram("variable name collides with a function symbol")

    def symbols(self) -> set[FunSym]:
        syms = {self.start, self.sink}
        for t in self.transitions:
            syms.add(t.source)
            syms.add(t.target)
        return syms

    def arity(self) -> int:
        return len(self.transitions[0].args) if self.transitions else 0

    def canonical_args(self) -> tuple[VarId, ...]:
        return self.transitions[0].args if self.transitions else ()

    def is_simplified(self) -> bool:
        return all(t.source == self.start for t in self.transitions)

    def simple_loops(self) -> list[Transition]:
        return [t for t in self.transitions if t.is_simple_loop()]

    def predecessors(self, sym: FunSym) -> list[Transition]:
        return [t for t in self.transitions if t.target == sym]

    def outgoing(self, sym: FunSym) -> list[Transition]:
        return [t for t in self.transitions if t.source == sym]

    def with_transitions(self, transitions: Iterable[Transition]) -> "Program":
        return Program(tuple(transitions), self.start, self.sink)

    def reachable_symbols(self) -> set[FunSym]:
        """Symbols reachable from start in the symbol graph."""
        seen = {self.start}
        frontier = [self.start]
        edges: dict[FunSym, set[FunSym]] = {}
        for t in self.transitions:
            edges.setdefault(t.source, set()).add(t.target)
        while frontier:
            sym = frontier.pop()
            for nxt in sorted(edges.get(sym, ())):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def variables(self) -> set[VarId]:
        vs: set[VarId] = set()
        for t in self.transitions:
            vs |= t.variables()
        return vs

    def __str__(self) -> str:
        lines = [f"start: {self.start}"]
        lines += [str(t) for t in self.transitions]
        return "\n".join(lines)


def make_transition(source: FunSym, args: Iterable[VarId], guard: Constraint,
                    update: Mapping[VarId, Poly] | UpdateMap, target: FunSym,
                    provenance: Optional[Provenance] = None,
                    temp_vars: Iterable[VarId] = (),
                    rule_index: int = 0) -> Transition:
    """Transition constructor used by the parser and by tests."""
    if not isinstance(update, UpdateMap):
        update = UpdateMap.of(dict(update))
    return Transition(
        source=source, args=tuple(args), guard=guard, update=update,
        target=target, temp_vars=tuple(temp_vars),
        provenance=provenance if provenance is not None else Original(rule_index))
