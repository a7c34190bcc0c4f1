"""Closed forms for iterated updates.

Solves the recurrence system x^(k+1) = update(x^(k)) with initial condition
x^(1) = update(x), producing a substitution mu with mu(x) = update^k(x) for
all k > 0.  The supported class is triangular affine-in-self updates with
polynomial inhomogeneity; anything else reports Unsolvable, which the
simplification strategy treats as "chain first or skip acceleration", not as
an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Optional

from .poly import Poly, UpdateMap, VarId, is_integer_valued, sum_over_range


class Unsolvable(Exception):
    """The update is outside the supported recurrence class."""


@dataclass(frozen=True)
class CfEntry:
    """Closed form of one variable: poly part plus terms coeff * base^k.

    `valid_from` is 1 for entries that only describe iterations k >= 1 (a
    variable set to a constant); dependent recurrences must not sum over such
    entries because their value at k = 0 is not the initial one.
    """

    poly: Poly
    exps: tuple[tuple[int, Poly], ...] = ()
    valid_from: int = 0

    def has_exponentials(self) -> bool:
        return bool(self.exps)


@dataclass(frozen=True)
class ClosedForm:
    """Per-variable closed forms in the counter `k`, plus the counter itself."""

    counter: VarId
    entries: tuple[tuple[VarId, CfEntry], ...]

    def entry(self, x: VarId) -> Optional[CfEntry]:
        for v, e in self.entries:
            if v == x:
                return e
        return None

    def has_exponentials(self) -> bool:
        return any(e.has_exponentials() for _, e in self.entries)

    def substitution(self) -> dict[VarId, Poly]:
        """The substitution mu, defined only when no exponential terms exist."""
        assert not self.has_exponentials()
        return {v: e.poly for v, e in self.entries}

    def instantiate(self, n: int) -> UpdateMap:
        """Evaluate at k = n (n >= 1), with exact powers for exponential terms."""
        if n < 1:
            raise ValueError("closed forms hold for k >= 1 only")
        ksub = {self.counter: Poly.const(n)}
        out: dict[VarId, Poly] = {}
        for v, e in self.entries:
            p = e.poly.subst(ksub)
            for base, coeff in e.exps:
                p = p + coeff.subst(ksub).scale(Fraction(base) ** n)
            out[v] = p
        return UpdateMap.of(out)


def solve_update(update: UpdateMap, args: tuple[VarId, ...], counter: VarId) -> ClosedForm:
    """Solve the iterated-update recurrences for all argument variables.

    Raises Unsolvable for cyclic dependencies between distinct variables,
    non-affine self-dependence, alternating sign (coefficient -1, which the
    strategy resolves by self-chaining first), resets to non-constant values,
    and inhomogeneities that are not polynomial in the counter.
    """
    deps: dict[VarId, set[VarId]] = {}
    relevant = [x for x in args if update.get(x) != Poly.var(x)]
    for x in args:
        deps[x] = (update.get(x).variables() & set(args)) - {x}

    order = _topological(args, deps)

    solved: dict[VarId, CfEntry] = {}
    i_var = counter + "!i"  # summation index, local to this solver
    for x in order:
        rhs = update.get(x)
        if rhs == Poly.var(x):
            solved[x] = CfEntry(Poly.var(x))
            continue
        c, p = _split_self_affine(rhs, x)
        # Substitute already-solved closed forms into the inhomogeneity.
        q = Poly.zero()
        exp_leak = False
        for mono, coeff in p.terms:
            term = Poly((((), coeff),))
            for v, e in mono:
                if v in solved:
                    entry = solved[v]
                    if entry.valid_from > 0 or entry.has_exponentials():
                        # Value at iteration i is not entry.poly(i) for i = 0,
                        # or is not polynomial at all.
                        if entry.valid_from > 0:
                            raise Unsolvable(
                                f"{x} depends on {v}, which resets to a constant")
                        exp_leak = True
                        break
                    term = term * entry.poly.subst({counter: Poly.var(i_var)}).pow(e)
                else:
                    term = term * Poly.var(v).pow(e)
            if exp_leak:
                break
            q = q + term
        if exp_leak:
            raise Unsolvable(f"inhomogeneity for {x} contains exponential terms")

        if c == 1:
            # x^(k) = x + sum_{i=0}^{k-1} q(i)
            total = Poly.var(x) + sum_over_range(q, i_var, counter)
            solved[x] = CfEntry(total)
        elif c == 0:
            if not q.is_const():
                raise Unsolvable(f"{x} is reset to the non-constant value {q}")
            solved[x] = CfEntry(q, valid_from=1)
        elif c == -1:
            raise Unsolvable(
                f"{x} alternates sign; chain the loop with itself first")
        else:
            solved[x] = _solve_geometric(x, c, q, i_var, counter)

    entries = tuple((x, solved[x]) for x in args)
    cf = ClosedForm(counter, entries)
    for x in relevant:
        e = cf.entry(x)
        if e is not None and not e.has_exponentials() and not is_integer_valued(e.poly):
            raise Unsolvable(f"closed form for {x} is not integer-valued")
    return cf


def _topological(args: tuple[VarId, ...], deps: dict[VarId, set[VarId]]) -> list[VarId]:
    order: list[VarId] = []
    state: dict[VarId, int] = {}  # 0 unvisited / 1 on stack / 2 done

    def visit(x: VarId):
        if state.get(x) == 2:
            return
        if state.get(x) == 1:
            raise Unsolvable(f"cyclic dependency through {x}")
        state[x] = 1
        for y in sorted(deps[x]):
            visit(y)
        state[x] = 2
        order.append(x)

    for x in args:
        visit(x)
    return order


def _split_self_affine(rhs: Poly, x: VarId) -> tuple[Fraction, Poly]:
    """Write rhs as c*x + p with x not occurring in p, or raise Unsolvable."""
    if rhs.degree_in(x) > 1:
        raise Unsolvable(f"update of {x} is not affine in {x}")
    c_poly = rhs.coeff_in(x, 1)
    if not c_poly.is_const():
        raise Unsolvable(f"coefficient of {x} in its own update is not constant")
    c = c_poly.const_value()
    p = rhs - Poly.var(x).scale(c)
    return c, p


def _solve_geometric(x: VarId, c: Fraction, q: Poly, i_var: VarId,
                     counter: VarId) -> CfEntry:
    """Undetermined coefficients for x^(k+1) = c*x^(k) + q(k), c not in {0,1,-1}."""
    if c.denominator != 1:
        raise Unsolvable(f"non-integer self-coefficient {c} for {x}")
    d = q.degree_in(i_var)
    # Particular solution P with P(k+1) - c*P(k) = q(k), same degree as q.
    coeffs: dict[int, Poly] = {}
    for j in range(d, -1, -1):
        # Coefficient of k^j in P(k+1) - c*P(k):
        #   (1-c)*a_j + sum_{m>j} a_m * C(m, j)
        acc = q.coeff_in(i_var, j)
        for m in range(j + 1, d + 1):
            acc = acc - coeffs[m].scale(comb(m, j))
        coeffs[j] = acc.scale(Fraction(1, 1) / (1 - c))
    particular = Poly.zero()
    kpoly = Poly.var(counter)
    for j, a in coeffs.items():
        particular = particular + a * kpoly.pow(j)
    p_at_0 = particular.subst({counter: Poly.zero()})
    homogeneous = Poly.var(x) - p_at_0
    exps = () if homogeneous.is_zero() else ((int(c), homogeneous),)
    return CfEntry(particular, exps=exps)
