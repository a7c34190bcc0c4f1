"""Parser and printer for the KoAT-style integer transition system format.

Grammar (a compatible subset of the TPDB "Termination of Integer Transition
Systems" format):

    (GOAL COMPLEXITY|NONTERM)            # accepted, ignored
    (STARTTERM (FUNCTIONSYMBOLS name))
    (VAR v1 v2 ...)
    (RULES
      f(x, y) -> g(x - 1, y) :|: x > 0 && y >= x
      ...)

Expressions use integer literals, variables, `+ - *`, and parentheses; atoms
compare two expressions with `>=, >, <=, <, =`.  `Com_1(...)` wrappers around
right-hand sides are accepted and stripped.  Parsing establishes the
program-level invariants: one canonical argument list for every rule (renaming
by position), all symbols padded to one arity, and a fresh start symbol when
the declared one occurs on a right-hand side.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .poly import Atom, Constraint, Poly, atoms_from_relation
from .program import Program, Transition, make_transition


class SyntaxErr(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class ArityError(ValueError):
    pass


class NonIntegerLiteral(ValueError):
    pass


_TOKEN = re.compile(r"""
    (?P<lpar>\()|(?P<rpar>\))|(?P<comma>,)|
    (?P<arrow>->)|(?P<guard>:\|:)|(?P<andop>&&)|
    (?P<rel>>=|<=|==|=|<|>)|
    (?P<op>[+*-])|
    (?P<num>\d+(?:\.\d+)?)|
    (?P<name>[A-Za-z_][A-Za-z0-9_.']*)|
    (?P<ws>\s+)
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Tok]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SyntaxErr(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            tokens.append(_Tok(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


@dataclass
class ParsedRule:
    lhs_sym: str
    lhs_args: list[str]
    rhs_sym: str
    rhs_terms: list[Poly]
    guard: list[tuple[Poly, str, Poly]]
    line: int


@dataclass
class ParsedFile:
    goal: Optional[str]
    start: str
    declared_vars: list[str]
    rules: list[ParsedRule]


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> Optional[_Tok]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Tok("", "", 1, 1)
            raise SyntaxErr("unexpected end of input", last.line, last.column)
        self.pos += 1
        return tok

    def expect(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            raise SyntaxErr(f"expected {text or kind}, got {tok.text!r}",
                            tok.line, tok.column)
        return tok

    # -- sections ----------------------------------------------------------

    def parse_file(self) -> ParsedFile:
        goal = None
        start = None
        declared: list[str] = []
        rules: list[ParsedRule] = []
        while self.peek() is not None:
            self.expect("lpar")
            head = self.expect("name")
            if head.text == "GOAL":
                goal = self.expect("name").text
                self.expect("rpar")
            elif head.text == "STARTTERM":
                self.expect("lpar")
                self.expect("name", "FUNCTIONSYMBOLS")
                start = self.expect("name").text
                self.expect("rpar")
                self.expect("rpar")
            elif head.text == "VAR":
                while self.peek() and self.peek().kind == "name":
                    declared.append(self.next().text)
                self.expect("rpar")
            elif head.text == "RULES":
                while self.peek() and self.peek().kind != "rpar":
                    rules.append(self.parse_rule())
                self.expect("rpar")
            else:
                raise SyntaxErr(f"unknown section {head.text!r}",
                                head.line, head.column)
        if start is None:
            raise SyntaxErr("missing STARTTERM declaration", 1, 1)
        if not rules:
            raise SyntaxErr("no rules", 1, 1)
        return ParsedFile(goal, start, declared, rules)

    def parse_rule(self) -> ParsedRule:
        sym = self.expect("name")
        args = self.parse_arg_list()
        for a in args:
            if not isinstance(a, Poly) or len(a.terms) != 1 or \
                    a.terms[0][0] == () or a.terms[0][1] != 1 or \
                    a.terms[0][0][0][1] != 1:
                raise SyntaxErr("left-hand side arguments must be variables",
                                sym.line, sym.column)
        lhs_args = [a.terms[0][0][0][0] for a in args]
        if len(set(lhs_args)) != len(lhs_args):
            raise SyntaxErr("left-hand side arguments must be distinct",
                            sym.line, sym.column)
        self.expect("arrow")
        rhs = self.expect("name")
        rhs_sym, rhs_terms = rhs.text, self.parse_arg_list()
        if rhs_sym == "Com_1":  # TPDB wrapper around the real right-hand side
            inner = rhs_terms
            if len(inner) != 1 or not isinstance(inner[0], tuple):
                raise SyntaxErr("Com_1 must wrap a single function term",
                                rhs.line, rhs.column)
            rhs_sym, rhs_terms = inner[0]
        guard: list[tuple[Poly, str, Poly]] = []
        if self.peek() and self.peek().kind == "guard":
            self.next()
            guard.append(self.parse_atom())
            while self.peek() and self.peek().kind == "andop":
                self.next()
                guard.append(self.parse_atom())
        return ParsedRule(sym.text, lhs_args, rhs_sym,
                          [t if isinstance(t, Poly) else _term_error(t, rhs)
                           for t in rhs_terms],
                          guard, sym.line)

    def parse_arg_list(self):
        """(e1, ..., en); an element may itself be a function term (for Com_1)."""
        self.expect("lpar")
        items = []
        if self.peek() and self.peek().kind != "rpar":
            items.append(self.parse_term_or_expr())
            while self.peek() and self.peek().kind == "comma":
                self.next()
                items.append(self.parse_term_or_expr())
        self.expect("rpar")
        return items

    def parse_term_or_expr(self):
        tok = self.peek()
        if tok.kind == "name" and self.pos + 1 < len(self.tokens) and \
                self.tokens[self.pos + 1].kind == "lpar":
            name = self.next().text
            inner = self.parse_arg_list()
            return (name, [t for t in inner])
        return self.parse_expr()

    def parse_atom(self) -> tuple[Poly, str, Poly]:
        lhs = self.parse_expr()
        rel = self.next()
        if rel.kind != "rel":
            raise SyntaxErr(f"expected a comparison, got {rel.text!r}",
                            rel.line, rel.column)
        rhs = self.parse_expr()
        return (lhs, rel.text, rhs)

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> Poly:
        p = self.parse_product()
        while self.peek() and self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next().text
            q = self.parse_product()
            p = p + q if op == "+" else p - q
        return p

    def parse_product(self) -> Poly:
        p = self.parse_factor()
        while self.peek() and self.peek().kind == "op" and self.peek().text == "*":
            self.next()
            p = p * self.parse_factor()
        return p

    def parse_factor(self) -> Poly:
        tok = self.next()
        if tok.kind == "op" and tok.text == "-":
            return -self.parse_factor()
        if tok.kind == "num":
            if "." in tok.text:
                raise NonIntegerLiteral(
                    f"{tok.line}:{tok.column}: non-integer literal {tok.text}")
            return Poly.const(int(tok.text))
        if tok.kind == "name":
            return Poly.var(tok.text)
        if tok.kind == "lpar":
            p = self.parse_expr()
            self.expect("rpar")
            return p
        raise SyntaxErr(f"unexpected token {tok.text!r}", tok.line, tok.column)


def _term_error(t, tok):
    raise SyntaxErr("nested function terms are only allowed under Com_1",
                    tok.line, tok.column)


# ---------------------------------------------------------------------------
# Elaboration into a Program
# ---------------------------------------------------------------------------

SINK = "!sink"


def parse(text: str) -> Program:
    parsed = _Parser(text).parse_file()
    return elaborate(parsed)


def elaborate(parsed: ParsedFile) -> Program:
    rules = parsed.rules
    arities = _symbol_arities(rules)
    arity = max(arities.values())
    canonical = _canonical_args(parsed, arity)

    # Start-symbol hygiene: if the start occurs on a right-hand side, route
    # runs through a fresh start symbol instead.
    start = parsed.start
    if any(r.rhs_sym == start for r in rules):
        fresh = start + "'"
        taken = set(arities)
        while fresh in taken:
            fresh += "'"
        for r in rules:
            r.lhs_sym = fresh if r.lhs_sym == start else r.lhs_sym
            r.rhs_sym = fresh if r.rhs_sym == start else r.rhs_sym
        arities[fresh] = arities.pop(start)
        entry = ParsedRule(start, list(canonical), fresh,
                           [Poly.var(v) for v in canonical], [], 0)
        rules = [entry] + rules
        arities[start] = arity

    transitions = []
    for index, r in enumerate(rules, start=1):
        if r.rhs_sym == SINK or r.lhs_sym == SINK:
            raise ArityError(f"rule {index}: symbol {SINK} is reserved")
        transitions.append(_elaborate_rule(r, index, canonical))
    return Program(tuple(transitions), start, SINK)


def _symbol_arities(rules: list[ParsedRule]) -> dict[str, int]:
    """Arity per symbol; mixed arities for one symbol are an error.

    Different symbols may have different arities in the input; elaboration
    pads everything to the maximum with identity-carried extra positions.
    """
    arities: dict[str, int] = {}

    def record(sym: str, n: int, line: int):
        if arities.setdefault(sym, n) != n:
            raise ArityError(
                f"line {line}: {sym} used with arity {n}, "
                f"elsewhere {arities[sym]}")

    for r in rules:
        record(r.lhs_sym, len(r.lhs_args), r.line)
    for r in rules:
        record(r.rhs_sym, len(r.rhs_terms), r.line)
    return arities


def _canonical_args(parsed: ParsedFile, arity: int) -> list[str]:
    """One argument list shared by every rule: the first full-arity lhs wins."""
    for r in parsed.rules:
        if len(r.lhs_args) == arity:
            return list(r.lhs_args)
    base = [v for v in parsed.declared_vars]
    while len(base) < arity:
        base.append(f"v{len(base)}")
    return base[:arity]


def _elaborate_rule(r: ParsedRule, index: int, canonical: list[str]) -> Transition:
    # Rename this rule's variables to the canonical list, by position.
    renaming = {old: Poly.var(new) for old, new in zip(r.lhs_args, canonical)}
    free = set()
    for e in r.rhs_terms:
        free |= e.variables()
    for lhs, _, rhs in r.guard:
        free |= lhs.variables() | rhs.variables()
    unknown = free - set(r.lhs_args)
    if unknown:
        raise ArityError(
            f"rule {index} (line {r.line}): variables {sorted(unknown)} do not "
            f"occur on the left-hand side")

    rhs_terms = [e.subst(renaming) for e in r.rhs_terms]
    # Pad to the common arity: extra positions carry their caller value.
    rhs_terms += [Poly.var(v) for v in canonical[len(rhs_terms):]]

    atoms: list[Atom] = []
    for lhs, rel, rhs in r.guard:
        atoms.extend(atoms_from_relation(lhs.subst(renaming), rel,
                                         rhs.subst(renaming)))
    update = {v: t for v, t in zip(canonical, rhs_terms)}
    return make_transition(r.lhs_sym, canonical, Constraint(tuple(atoms)),
                           update, r.rhs_sym, rule_index=index)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def print_program(prog: Program) -> str:
    """Concrete syntax that reparses to a structurally identical program."""
    lines = ["(GOAL NONTERM)",
             f"(STARTTERM (FUNCTIONSYMBOLS {prog.start}))",
             "(VAR " + " ".join(prog.canonical_args()) + ")",
             "(RULES"]
    for t in prog.transitions:
        lhs = f"{t.source}({', '.join(t.args)})"
        rhs_terms = ", ".join(_poly_src(t.update.get(x)) for x in t.args)
        rhs = f"{t.target}({rhs_terms})"
        guard = ""
        if t.guard.atoms:
            guard = " :|: " + " && ".join(
                f"{_poly_src(a.poly)} >= 0" for a in t.guard.atoms)
        lines.append(f"  {lhs} -> {rhs}{guard}")
    lines.append(")")
    return "\n".join(lines) + "\n"


def _poly_src(p: Poly) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for mono, c in p.terms:
        assert c.denominator == 1
        factors = "*".join(v for v, e in mono for _ in range(e))
        n = c.numerator
        if not factors:
            term = str(abs(n))
        elif abs(n) == 1:
            term = factors
        else:
            term = f"{abs(n)}*{factors}"
        parts.append((n < 0, term))
    out = ("-" if parts[0][0] else "") + parts[0][1]
    for neg, term in parts[1:]:
        out += (" - " if neg else " + ") + term
    return out
