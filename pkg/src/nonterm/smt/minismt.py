"""Bundled fallback SMT solver for QF_NIA, speaking the SMT-LIB 2 pipe protocol.

Used when neither a `z3` binary nor the z3-solver WebAssembly shim is
available, so the tool keeps working with zero external dependencies.  It is
deliberately incomplete but honest:

  * `unsat` answers come from exact Fourier-Motzkin elimination over the
    rationals on a DNF expansion (sound for integer unsatisfiability, linear
    atoms only);
  * `sat` answers come from bounded branch-and-prune search over expanding
    integer boxes with interval pruning (sound for any polynomial atoms);
  * everything else is `unknown`.

Run as `python -m nonterm.smt.minismt`.
"""

from __future__ import annotations

import math
import sys
import time
from fractions import Fraction
from typing import Optional

from ..poly import Atom, Poly
from .formula import (And, Formula, Not, Or, SexprError, parse_sexprs,
                      sexpr_to_formula)

BRANCH_BUDGET = 256
FM_CONSTRAINT_CAP = 4000
BOX_SCHEDULE = (1, 2, 4, 8, 16, 32, 64, 128, 512, 2048)


# ---------------------------------------------------------------------------
# DNF expansion into atom branches
# ---------------------------------------------------------------------------

def to_branches(f: Formula, negate: bool = False) -> Optional[list[list[Atom]]]:
    """DNF as lists of atoms; None when the expansion exceeds the budget."""
    if isinstance(f, Atom):
        return [[f.negation() if negate else f]]
    if isinstance(f, Not):
        return to_branches(f.inner, not negate)
    parts = f.parts
    conjunctive = isinstance(f, And) != negate
    if conjunctive:
        branches: list[list[Atom]] = [[]]
        for p in parts:
            sub = to_branches(p, negate)
            if sub is None:
                return None
            branches = [b + s for b in branches for s in sub]
            if len(branches) > BRANCH_BUDGET:
                return None
        return branches
    out: list[list[Atom]] = []
    for p in parts:
        sub = to_branches(p, negate)
        if sub is None:
            return None
        out.extend(sub)
        if len(out) > BRANCH_BUDGET:
            return None
    return out


# ---------------------------------------------------------------------------
# Fourier-Motzkin over the rationals (exact)
# ---------------------------------------------------------------------------

def _linear_rows(atoms: list[Atom]) -> Optional[list[dict]]:
    rows = []
    for a in atoms:
        if a.poly.total_degree() > 1:
            return None
        row = {(): a.poly.constant_part()}
        for mono, c in a.poly.terms:
            if mono:
                row[mono[0][0]] = c
        rows.append(row)
    return rows


def fm_infeasible(atoms: list[Atom], deadline: float) -> bool:
    """True iff the conjunction has no rational solution (hence no integer one)."""
    rows = _linear_rows(atoms)
    if rows is None:
        return False
    variables = sorted({v for r in rows for v in r if v != ()})
    for x in variables:
        if time.monotonic() > deadline or len(rows) > FM_CONSTRAINT_CAP:
            return False
        pos = [r for r in rows if r.get(x, 0) > 0]
        neg = [r for r in rows if r.get(x, 0) < 0]
        rest = [r for r in rows if r.get(x, 0) == 0]
        for rp in pos:
            for rn in neg:
                # rp: a*x + u >= 0 (a>0), rn: -b*x + w >= 0 (b>0)
                # combine to b*u + a*w >= 0
                a, b = rp[x], -rn[x]
                combined: dict = {}
                for v in set(rp) | set(rn):
                    if v == x:
                        continue
                    val = b * rp.get(v, Fraction(0)) + a * rn.get(v, Fraction(0))
                    if val != 0 or v == ():
                        combined[v] = val
                combined.setdefault((), Fraction(0))
                rest.append(combined)
        rows = rest
    return any(r[()] < 0 and len(r) == 1 for r in rows)


# ---------------------------------------------------------------------------
# Branch-and-prune search for integer models
# ---------------------------------------------------------------------------

Interval = tuple[Optional[Fraction], Optional[Fraction]]  # None = unbounded


def _iv_add(a: Interval, b: Interval) -> Interval:
    lo = None if a[0] is None or b[0] is None else a[0] + b[0]
    hi = None if a[1] is None or b[1] is None else a[1] + b[1]
    return (lo, hi)


def _iv_mul(a: Interval, b: Interval) -> Interval:
    products = []
    for x in (a[0], a[1]):
        for y in (b[0], b[1]):
            if x is None or y is None:
                if x == 0 or y == 0:
                    products.append(Fraction(0))
                else:
                    return (None, None)
            else:
                products.append(x * y)
    return (min(products), max(products))


def _poly_interval(p: Poly, bounds: dict[str, Interval]) -> Interval:
    total: Interval = (Fraction(0), Fraction(0))
    for mono, c in p.terms:
        term: Interval = (c, c)
        for v, e in mono:
            iv = bounds.get(v, (None, None))
            for _ in range(e):
                term = _iv_mul(term, iv)
        total = _iv_add(total, term)
    return total


def _eval3(f: Formula, bounds: dict[str, Interval]) -> Optional[bool]:
    """Three-valued evaluation under interval bounds."""
    if isinstance(f, Atom):
        lo, hi = _poly_interval(f.poly, bounds)
        if hi is not None and hi < 0:
            return False
        if lo is not None and lo >= 0:
            return True
        return None
    if isinstance(f, Not):
        r = _eval3(f.inner, bounds)
        return None if r is None else not r
    results = [_eval3(p, bounds) for p in f.parts]
    if isinstance(f, And):
        if any(r is False for r in results):
            return False
        return True if all(r is True for r in results) else None
    if any(r is True for r in results):
        return True
    return False if all(r is False for r in results) else None


def _unit_bounds(f: Formula, box: int) -> dict[str, Interval]:
    """Initial per-variable bounds: the box, tightened by top-level unit atoms."""
    bounds: dict[str, Interval] = {}
    for v in sorted(_formula_vars(f)):
        bounds[v] = (Fraction(-box), Fraction(box))
    atoms: list[Atom] = []

    def collect(g: Formula):
        if isinstance(g, Atom):
            atoms.append(g)
        elif isinstance(g, And):
            for p in g.parts:
                collect(p)

    collect(f)
    for a in atoms:
        vs = a.poly.variables()
        if len(vs) == 1 and a.poly.total_degree() == 1:
            (x,) = vs
            c = a.poly.coeff_in(x, 1).const_value()
            d = a.poly.constant_part()
            lo, hi = bounds[x]
            if c > 0:
                lo = max(lo, Fraction(math.ceil(-d / c)))
            else:
                hi = min(hi, Fraction(math.floor(-d / c)))
            bounds[x] = (lo, hi)
    return bounds


def _formula_vars(f: Formula) -> set[str]:
    if isinstance(f, Atom):
        return f.variables()
    if isinstance(f, Not):
        return _formula_vars(f.inner)
    out: set[str] = set()
    for p in f.parts:
        out |= _formula_vars(p)
    return out


def _value_order(lo: int, hi: int):
    """0, 1, -1, 2, -2, ... clipped to [lo, hi]."""
    yield from (v for v in [0] if lo <= 0 <= hi)
    m = max(abs(lo), abs(hi))
    for d in range(1, m + 1):
        if lo <= d <= hi:
            yield d
        if lo <= -d <= hi:
            yield -d


def search_model(f: Formula, deadline: float) -> Optional[dict[str, int]]:
    variables = sorted(_formula_vars(f))
    if not variables:
        return {} if _eval3(f, {}) is True else None
    for box in BOX_SCHEDULE:
        if time.monotonic() > deadline:
            return None
        bounds = _unit_bounds(f, box)
        if any(lo is not None and hi is not None and lo > hi
               for lo, hi in bounds.values()):
            continue
        assignment: dict[str, int] = {}

        def assign(i: int) -> bool:
            if time.monotonic() > deadline:
                return False
            if i == len(variables):
                return True
            x = variables[i]
            lo, hi = bounds[x]
            lo_i, hi_i = int(math.ceil(lo)), int(math.floor(hi))
            for v in _value_order(lo_i, hi_i):
                saved = bounds[x]
                bounds[x] = (Fraction(v), Fraction(v))
                assignment[x] = v
                verdict = _eval3(f, bounds)
                if verdict is True and assign_rest_zero(i + 1, verdict):
                    return True
                if verdict is not False and assign(i + 1):
                    return True
                bounds[x] = saved
                assignment.pop(x, None)
            return False

        def assign_rest_zero(i: int, _verdict) -> bool:
            # Formula already definitely true: any in-box completion works.
            for x in variables[i:]:
                lo, hi = bounds[x]
                v = 0
                if lo is not None and lo > 0:
                    v = int(math.ceil(lo))
                elif hi is not None and hi < 0:
                    v = int(math.floor(hi))
                assignment[x] = v
            return True

        if assign(0):
            return dict(assignment)
    return None


# ---------------------------------------------------------------------------
# The REPL
# ---------------------------------------------------------------------------

class MiniSolver:
    def __init__(self):
        self.frames: list[list[Formula]] = [[]]
        self.decls: list[list[str]] = [[]]
        self.timeout_ms = 2000
        self.last_model: Optional[dict[str, int]] = None

    def declared(self) -> list[str]:
        return [d for frame in self.decls for d in frame]

    def assertions(self) -> list[Formula]:
        return [a for frame in self.frames for a in frame]

    def check_sat(self) -> str:
        deadline = time.monotonic() + self.timeout_ms / 1000.0
        self.last_model = None
        f = And(tuple(self.assertions()))
        branches = to_branches(f)
        if branches is not None:
            feasible = [b for b in branches
                        if not fm_infeasible(b, deadline)]
            if not feasible:
                return "unsat"
        model = search_model(f, deadline)
        if model is not None:
            for name in self.declared():
                model.setdefault(name, 0)
            self.last_model = model
            return "sat"
        return "unknown"

    def run(self, command) -> Optional[str]:
        if not isinstance(command, list) or not command:
            return None
        head = command[0]
        if head in ("set-logic", "set-info"):
            return None
        if head == "set-option":
            if len(command) == 3 and command[1] == ":timeout":
                self.timeout_ms = int(command[2])
            return None
        if head in ("declare-const", "declare-fun"):
            self.decls[-1].append(command[1])
            return None
        if head == "assert":
            self.frames[-1].append(sexpr_to_formula(command[1]))
            return None
        if head == "push":
            for _ in range(int(command[1]) if len(command) > 1 else 1):
                self.frames.append([])
                self.decls.append([])
            return None
        if head == "pop":
            for _ in range(int(command[1]) if len(command) > 1 else 1):
                if len(self.frames) > 1:
                    self.frames.pop()
                    self.decls.pop()
            return None
        if head == "check-sat":
            return self.check_sat()
        if head == "get-model":
            if self.last_model is None:
                return '(error "no model available")'
            lines = ["("]
            for name in sorted(self.last_model):
                lines.append(f"  (define-fun {name} () Int {self.last_model[name]})")
            lines.append(")")
            return "\n".join(lines)
        if head == "exit":
            raise SystemExit(0)
        return f'(error "unsupported command {head}")'


def main():
    solver = MiniSolver()
    buffered = ""
    depth = 0
    for line in sys.stdin:
        stripped = line.split(";", 1)[0]
        buffered += stripped
        depth += stripped.count("(") - stripped.count(")")
        if depth > 0 or not buffered.strip():
            continue
        text, buffered, depth = buffered, "", 0
        try:
            commands = parse_sexprs(text)
        except SexprError as exc:
            print(f'(error "{exc}")', flush=True)
            continue
        for cmd in commands:
            try:
                reply = solver.run(cmd)
            except SystemExit:
                return
            except SexprError as exc:
                reply = f'(error "{exc}")'
            if reply is not None:
                print(reply, flush=True)


if __name__ == "__main__":
    main()
