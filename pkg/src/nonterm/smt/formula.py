"""Quantifier-free formulas over integer atoms, with SMT-LIB 2 text round-trip.

The prover only ever needs boolean combinations of `poly >= 0` atoms over
integer variables.  The printer emits a small SMT-LIB 2 subset; the parser
reads that same subset back (it also accepts the other comparison operators,
normalizing them), which is what the bundled fallback solver consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from ..poly import Atom, Constraint, Poly, atoms_from_relation


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Not:
    inner: "Formula"


Formula = Union[Atom, And, Or, Not]

TRUE = And(())
FALSE = Or(())


def conj(parts: Iterable[Formula]) -> Formula:
    parts = tuple(parts)
    return parts[0] if len(parts) == 1 else And(parts)


def disj(parts: Iterable[Formula]) -> Formula:
    parts = tuple(parts)
    return parts[0] if len(parts) == 1 else Or(parts)


def implies(premise: Formula, conclusion: Formula) -> Formula:
    return Or((Not(premise), conclusion))


def from_constraint(c: Constraint) -> Formula:
    return conj(c.atoms) if c.atoms else TRUE


def formula_variables(f: Formula) -> set[str]:
    if isinstance(f, Atom):
        return f.variables()
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for p in f.parts:
            out |= formula_variables(p)
        return out
    return formula_variables(f.inner)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def poly_to_sexpr(p: Poly) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for mono, coeff in p.terms:
        assert coeff.denominator == 1, "emit only after clearing denominators"
        factors = [_int_sexpr(coeff.numerator)] if (coeff != 1 or not mono) else []
        for v, e in mono:
            factors.extend([v] * e)
        parts.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def _int_sexpr(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


def formula_to_sexpr(f: Formula) -> str:
    if isinstance(f, Atom):
        return f"(>= {poly_to_sexpr(f.poly)} 0)"
    if isinstance(f, And):
        if not f.parts:
            return "true"
        if len(f.parts) == 1:
            return formula_to_sexpr(f.parts[0])
        return f"(and {' '.join(formula_to_sexpr(p) for p in f.parts)})"
    if isinstance(f, Or):
        if not f.parts:
            return "false"
        if len(f.parts) == 1:
            return formula_to_sexpr(f.parts[0])
        return f"(or {' '.join(formula_to_sexpr(p) for p in f.parts)})"
    return f"(not {formula_to_sexpr(f.inner)})"


# ---------------------------------------------------------------------------
# S-expression parsing
# ---------------------------------------------------------------------------

class SexprError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch.isspace():
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            tokens.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in "();|" and not text[j].isspace():
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def parse_sexprs(text: str):
    """Parse a string into a list of nested lists/atoms."""
    tokens = tokenize(text)
    pos = 0

    def parse_one():
        nonlocal pos
        if pos >= len(tokens):
            raise SexprError("unexpected end of input")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while pos < len(tokens) and tokens[pos] != ")":
                items.append(parse_one())
            if pos >= len(tokens):
                raise SexprError("unbalanced parentheses")
            pos += 1
            return items
        if tok == ")":
            raise SexprError("unexpected ')'")
        return tok

    out = []
    while pos < len(tokens):
        out.append(parse_one())
    return out


def sexpr_to_poly(sx) -> Poly:
    if isinstance(sx, str):
        if sx.lstrip("-").isdigit():
            return Poly.const(int(sx))
        return Poly.var(sx)
    if not sx:
        raise SexprError("empty expression")
    op, *rest = sx
    if op == "+":
        out = Poly.zero()
        for r in rest:
            out = out + sexpr_to_poly(r)
        return out
    if op == "-":
        if len(rest) == 1:
            return -sexpr_to_poly(rest[0])
        out = sexpr_to_poly(rest[0])
        for r in rest[1:]:
            out = out - sexpr_to_poly(r)
        return out
    if op == "*":
        out = Poly.const(1)
        for r in rest:
            out = out * sexpr_to_poly(r)
        return out
    raise SexprError(f"unsupported arithmetic operator {op!r}")


def sexpr_to_formula(sx) -> Formula:
    if sx == "true":
        return TRUE
    if sx == "false":
        return FALSE
    if not isinstance(sx, list) or not sx:
        raise SexprError(f"expected a formula, got {sx!r}")
    op, *rest = sx
    if op == "and":
        return And(tuple(sexpr_to_formula(r) for r in rest))
    if op == "or":
        return Or(tuple(sexpr_to_formula(r) for r in rest))
    if op == "not":
        return Not(sexpr_to_formula(rest[0]))
    if op == "=>":
        return implies(sexpr_to_formula(rest[0]), sexpr_to_formula(rest[1]))
    if op in (">=", ">", "<=", "<", "="):
        lhs, rhs = sexpr_to_poly(rest[0]), sexpr_to_poly(rest[1])
        atoms = atoms_from_relation(lhs, op, rhs)
        return atoms[0] if len(atoms) == 1 else And(tuple(atoms))
    raise SexprError(f"unsupported formula operator {op!r}")


def parse_formula(text: str) -> Formula:
    sexprs = parse_sexprs(text)
    if len(sexprs) != 1:
        raise SexprError("expected exactly one formula")
    return sexpr_to_formula(sexprs[0])


def sexpr_to_int(sx) -> int:
    if isinstance(sx, str):
        if sx.lstrip("-").isdigit():
            return int(sx)
        raise SexprError(f"expected an integer, got {sx!r}")
    if isinstance(sx, list) and len(sx) == 2 and sx[0] == "-":
        return -sexpr_to_int(sx[1])
    raise SexprError(f"expected an integer, got {sx!r}")


def parse_model(text: str) -> dict[str, int]:
    """Extract variable values from a `get-model` reply.

    Accepts both bare `((define-fun ...) ...)` and the legacy
    `(model (define-fun ...) ...)` wrapping; values are integer literals,
    possibly of the form `(- n)`.
    """
    sexprs = parse_sexprs(text)
    model: dict[str, int] = {}

    def walk(sx):
        if not isinstance(sx, list):
            return
        if len(sx) >= 5 and sx[0] == "define-fun" and sx[2] == [] and sx[3] == "Int":
            name = sx[1].strip("|") if isinstance(sx[1], str) else sx[1]
            model[name] = sexpr_to_int(sx[4])
            return
        for item in sx:
            walk(item)

    for sx in sexprs:
        walk(sx)
    return model
