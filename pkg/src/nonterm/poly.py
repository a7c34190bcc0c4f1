"""Exact multivariate polynomial arithmetic and guard constraints.

Everything downstream (recurrence solving, guard manipulation, SMT emission,
witness validation) is built on the types in this module.  All arithmetic is
exact: coefficients are `fractions.Fraction`, values are Python ints.  No
floating point anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, lcm
from typing import Iterable, Mapping, Union

# A variable is just its name.  Function symbols live in program.py and use a
# separate namespace; disjointness is checked at program construction.
VarId = str

# A monomial maps variables to positive exponents, stored as a sorted tuple so
# it can be a dict key.  The empty tuple is the constant monomial.
Monomial = tuple[tuple[VarId, int], ...]

Coeff = Union[int, Fraction]


class MissingVariable(KeyError):
    """A polynomial was evaluated under a valuation missing one of its variables."""


def _mul_monomials(a: Monomial, b: Monomial) -> Monomial:
    exps: dict[VarId, int] = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


@dataclass(frozen=True)
class Poly:
    """Multivariate polynomial with rational coefficients, in canonical form.

    Canonical form: no zero coefficients, monomials merged and sorted, so two
    polynomials are equal iff their `terms` tuples are equal.  Instances are
    immutable and hashable.
    """

    terms: tuple[tuple[Monomial, Fraction], ...]

    # -- construction ------------------------------------------------------

    @staticmethod
    def _make(termmap: Mapping[Monomial, Fraction]) -> "Poly":
        items = tuple(sorted(
            ((m, c) for m, c in termmap.items() if c != 0),
            key=lambda t: t[0],
        ))
        return Poly(items)

    @staticmethod
    def const(c: Coeff) -> "Poly":
        c = Fraction(c)
        return Poly(()) if c == 0 else Poly((((), c),))

    @staticmethod
    def var(name: VarId) -> "Poly":
        return Poly(((((name, 1),), Fraction(1)),))

    @staticmethod
    def zero() -> "Poly":
        return Poly(())

    # -- queries -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(m == () for m, _ in self.terms)

    def const_value(self) -> Fraction:
        """Value of a constant polynomial (the constant term otherwise)."""
        for m, c in self.terms:
            if m == ():
                return c
        return Fraction(0)

    def variables(self) -> set[VarId]:
        return {v for m, _ in self.terms for v, _ in m}

    def degree_in(self, x: VarId) -> int:
        return max((e for m, _ in self.terms for v, e in m if v == x), default=0)

    def total_degree(self) -> int:
        return max((sum(e for _, e in m) for m, _ in self.terms), default=0)

    def coeff_of_monomial(self, m: Monomial) -> Fraction:
        for mm, c in self.terms:
            if mm == m:
                return c
        return Fraction(0)

    def coeff_in(self, x: VarId, exponent: int) -> "Poly":
        """Coefficient of x**exponent, a polynomial in the other variables."""
        out: dict[Monomial, Fraction] = {}
        for m, c in self.terms:
            e = dict(m).get(x, 0)
            if e == exponent:
                rest = tuple((v, k) for v, k in m if v != x)
                out[rest] = out.get(rest, Fraction(0)) + c
        return Poly._make(out)

    def is_linear_in(self, vs: Iterable[VarId]) -> bool:
        """True if every monomial has total degree <= 1 in the given variables."""
        vset = set(vs)
        for m, _ in self.terms:
            if sum(e for v, e in m if v in vset) > 1:
                return False
        return True

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms:
            out[m] = out.get(m, Fraction(0)) + c
        return Poly._make(out)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __neg__(self) -> "Poly":
        return Poly(tuple((m, -c) for m, c in self.terms))

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = _mul_monomials(m1, m2)
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Poly._make(out)

    def scale(self, c: Coeff) -> "Poly":
        c = Fraction(c)
        if c == 0:
            return Poly(())
        return Poly(tuple((m, k * c) for m, k in self.terms))

    def pow(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative exponent")
        result = Poly.const(1)
        for _ in range(n):
            result = result * self
        return result

    # -- evaluation and substitution ----------------------------------------

    def eval(self, valuation: Mapping[VarId, Coeff]) -> Fraction:
        """Exact value under a total valuation; raises MissingVariable otherwise."""
        total = Fraction(0)
        for m, c in self.terms:
            acc = c
            for v, e in m:
                if v not in valuation:
                    raise MissingVariable(v)
                acc *= Fraction(valuation[v]) ** e
            total += acc
        return total

    def subst(self, s: Mapping[VarId, "Poly"]) -> "Poly":
        """Simultaneous substitution; unmapped variables stay themselves."""
        result = Poly.zero()
        for m, c in self.terms:
            acc = Poly.const(c)
            for v, e in m:
                repl = s.get(v)
                acc = acc * (repl.pow(e) if repl is not None else
                             Poly(((((v, e),), Fraction(1)),)))
            result = result + acc
        return result

    def denominator_lcm(self) -> int:
        return lcm(*(c.denominator for _, c in self.terms)) if self.terms else 1

    def constant_part(self) -> Fraction:
        return self.const_value()

    def nonconstant_part(self) -> "Poly":
        return Poly(tuple((m, c) for m, c in self.terms if m != ()))

    # -- printing ------------------------------------------------------------

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.terms:
            mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}")
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out


def poly_from_int_affine(const: int = 0, **coeffs: int) -> Poly:
    """Convenience constructor for tests: poly_from_int_affine(3, x=2) = 2x + 3."""
    p = Poly.const(const)
    for v, c in coeffs.items():
        p = p + Poly.var(v).scale(c)
    return p


# ---------------------------------------------------------------------------
# Integer-valuedness
# ---------------------------------------------------------------------------

def is_integer_valued(p: Poly) -> bool:
    """Whether p maps every integer point to an integer.

    Uses the binomial-basis criterion computed by iterated finite differences:
    p is integer-valued iff, expanding p per variable into binomial-coefficient
    basis C(x, j), all base coefficients are integers.  Exact, no sampling.
    """
    vs = sorted(p.variables())
    if not vs:
        return p.const_value().denominator == 1
    x = vs[0]
    d = p.degree_in(x)
    # c_j = (Delta_x^j p)(x=0) is the coefficient of C(x, j); recurse on it.
    shifted = p
    zero_sub = {x: Poly.zero()}
    for _ in range(d + 1):
        if not is_integer_valued(shifted.subst(zero_sub)):
            return False
        shifted = shifted.subst({x: Poly.var(x) + Poly.const(1)}) - shifted
    return True


# ---------------------------------------------------------------------------
# Atoms and constraints
# ---------------------------------------------------------------------------

RELATIONS = (">=", ">", "<=", "<", "=")


@dataclass(frozen=True)
class Atom:
    """A single integer inequation in the normal form ``poly >= 0``.

    Coefficients are integral (denominators cleared at construction) and
    strict comparisons are tightened over the integers, so `t > 0` is stored
    as `t - 1 >= 0`.
    """

    poly: Poly

    @staticmethod
    def geq_zero(p: Poly) -> "Atom":
        scale = p.denominator_lcm()
        return Atom(p.scale(scale))

    def negation(self) -> "Atom":
        """Integer negation: not (p >= 0) is -p - 1 >= 0."""
        return Atom.geq_zero(-self.poly - Poly.const(1))

    def subst(self, s: Mapping[VarId, Poly]) -> "Atom":
        return Atom.geq_zero(self.poly.subst(s))

    def variables(self) -> set[VarId]:
        return self.poly.variables()

    def holds(self, valuation: Mapping[VarId, Coeff]) -> bool:
        return self.poly.eval(valuation) >= 0

    def is_trivially_true(self) -> bool:
        return self.poly.is_const() and self.poly.const_value() >= 0

    def is_trivially_false(self) -> bool:
        return self.poly.is_const() and self.poly.const_value() < 0

    def __str__(self) -> str:
        return f"{self.poly} >= 0"


def atoms_from_relation(lhs: Poly, rel: str, rhs: Poly) -> list[Atom]:
    """Normalize `lhs rel rhs` into one or two `>= 0` atoms over the integers."""
    if rel == ">=":
        return [Atom.geq_zero(lhs - rhs)]
    if rel == ">":
        return [Atom.geq_zero(lhs - rhs - Poly.const(1))]
    if rel == "<=":
        return [Atom.geq_zero(rhs - lhs)]
    if rel == "<":
        return [Atom.geq_zero(rhs - lhs - Poly.const(1))]
    if rel == "=":
        return [Atom.geq_zero(lhs - rhs), Atom.geq_zero(rhs - lhs)]
    raise ValueError(f"unknown relation {rel!r}")


@dataclass(frozen=True)
class Constraint:
    """A conjunction of atoms.  The empty constraint is `true`.

    Atom order is preserved: the guard-partition fixpoints and the greedy
    Max-SMT soft ordering use it as a deterministic tie-breaker.
    """

    atoms: tuple[Atom, ...] = ()

    @staticmethod
    def of(*atoms: Atom) -> "Constraint":
        return Constraint(tuple(atoms))

    @staticmethod
    def true() -> "Constraint":
        return Constraint(())

    def conjoin(self, other: "Constraint") -> "Constraint":
        return Constraint(self.atoms + other.atoms)

    def subst(self, s: Mapping[VarId, Poly]) -> "Constraint":
        return Constraint(tuple(a.subst(s) for a in self.atoms))

    def variables(self) -> set[VarId]:
        return {v for a in self.atoms for v in a.variables()}

    def holds(self, valuation: Mapping[VarId, Coeff]) -> bool:
        return all(a.holds(valuation) for a in self.atoms)

    def without(self, drop: Iterable[Atom]) -> "Constraint":
        dropped = list(drop)
        kept = []
        for a in self.atoms:
            if a in dropped:
                dropped.remove(a)  # multiset removal, keeps duplicates honest
            else:
                kept.append(a)
        return Constraint(tuple(kept))

    def simplified(self) -> "Constraint":
        """Light semantic-preserving cleanup used after chaining.

        Drops syntactically duplicate atoms, drops trivially true atoms, and
        merges atoms whose non-constant parts coincide (keeping the stronger
        bound).  First occurrence keeps its position.
        """
        by_body: dict[tuple, int] = {}
        kept: list[Atom] = []
        for a in self.atoms:
            if a.is_trivially_true():
                continue
            body = a.poly.nonconstant_part()
            if body.is_zero():
                if a not in kept:
                    kept.append(a)  # trivially false atom, keep for unsat detection
                continue
            key = body.terms
            if key in by_body:
                i = by_body[key]
                # q + c >= 0: smaller constant = stronger conjunct.
                if a.poly.constant_part() < kept[i].poly.constant_part():
                    kept[i] = a
            else:
                by_body[key] = len(kept)
                kept.append(a)
        return Constraint(tuple(kept))

    def is_true(self) -> bool:
        return not self.atoms

    def __str__(self) -> str:
        return " && ".join(str(a) for a in self.atoms) if self.atoms else "true"

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)


# ---------------------------------------------------------------------------
# Update maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UpdateMap:
    """Simultaneous substitution x -> t applied by one transition step.

    Variables outside the stored entries map to themselves.  Entries are kept
    sorted by variable name so equal maps compare equal.
    """

    entries: tuple[tuple[VarId, Poly], ...] = ()

    @staticmethod
    def of(mapping: Mapping[VarId, Poly]) -> "UpdateMap":
        items = tuple(sorted(
            (v, p) for v, p in mapping.items() if p != Poly.var(v)
        ))
        return UpdateMap(items)

    @staticmethod
    def identity() -> "UpdateMap":
        return UpdateMap(())

    def as_dict(self) -> dict[VarId, Poly]:
        return dict(self.entries)

    def get(self, x: VarId) -> Poly:
        for v, p in self.entries:
            if v == x:
                return p
        return Poly.var(x)

    def domain(self) -> set[VarId]:
        return {v for v, _ in self.entries}

    def apply_to_poly(self, p: Poly) -> Poly:
        return p.subst(self.as_dict())

    def apply_to_atom(self, a: Atom) -> Atom:
        return a.subst(self.as_dict())

    def apply_to_constraint(self, c: Constraint) -> Constraint:
        return c.subst(self.as_dict())

    def compose(self, second: "UpdateMap") -> "UpdateMap":
        """Update performing `self` then `second`: x -> self(second(x))."""
        out: dict[VarId, Poly] = {}
        for x in self.domain() | second.domain():
            out[x] = second.get(x).subst(self.as_dict())
        return UpdateMap.of(out)

    def variables(self) -> set[VarId]:
        vs: set[VarId] = set()
        for v, p in self.entries:
            vs.add(v)
            vs |= p.variables()
        return vs

    def is_integer_valued(self) -> bool:
        return all(is_integer_valued(p) for _, p in self.entries)

    def __str__(self) -> str:
        if not self.entries:
            return "{}"
        return "{" + ", ".join(f"{v} -> {p}" for v, p in self.entries) + "}"


def apply_subst(target, s: Mapping[VarId, Poly]):
    """Substitution dispatch over the expression kinds used in guards/updates."""
    if isinstance(target, Poly):
        return target.subst(s)
    if isinstance(target, (Atom, Constraint)):
        return target.subst(s)
    if isinstance(target, UpdateMap):
        return UpdateMap.of({v: p.subst(s) for v, p in target.entries})
    raise TypeError(f"cannot substitute into {type(target).__name__}")


# ---------------------------------------------------------------------------
# Summation helpers used by the recurrence solver
# ---------------------------------------------------------------------------

def _stirling2(n: int, k: int) -> int:
    if k == 0:
        return 1 if n == 0 else 0
    if k > n:
        return 0
    s = 0
    for j in range(k + 1):
        s += (-1) ** (k - j) * comb(k, j) * j ** n
    return s // _factorial(k)


def _factorial(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def _falling_factorial_poly(x: VarId, j: int) -> Poly:
    """x*(x-1)*...*(x-j+1) as a polynomial."""
    p = Poly.const(1)
    for i in range(j):
        p = p * (Poly.var(x) - Poly.const(i))
    return p


def sum_over_range(q: Poly, i_var: VarId, k_var: VarId) -> Poly:
    """Exact closed form for sum_{i=0}^{k-1} q(i, rest).

    Works in the falling-factorial basis: i^m expands into falling factorials
    via Stirling numbers, each of which sums to a falling factorial in k of
    one higher order.  Coefficients may mention other program variables.
    """
    d = q.degree_in(i_var)
    total = Poly.zero()
    for m in range(d + 1):
        coeff = q.coeff_in(i_var, m)  # polynomial in the other variables
        if coeff.is_zero():
            continue
        summed = Poly.zero()
        for j in range(m + 1):
            s2 = _stirling2(m, j)
            if s2 == 0:
                continue
            term = _falling_factorial_poly(k_var, j + 1).scale(
                Fraction(s2, j + 1))
            summed = summed + term
        total = total + coeff * summed
    return total
