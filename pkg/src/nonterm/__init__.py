"""Non-termination prover for integer transition systems.

Simplifies a program with sound under-approximating processors (loop
acceleration, chaining, recurrent-set and fixpoint detection, guard
strengthening with synthesized invariants) until it is loop-free, then
extracts and independently validates a witness configuration.
"""

from .poly import Atom, Constraint, Poly, UpdateMap, apply_subst, is_integer_valued
from .program import Configuration, Program, Transition, make_transition
from .recurrence import ClosedForm, Unsolvable, solve_update

__all__ = [
    "Atom", "Constraint", "Poly", "UpdateMap", "apply_subst",
    "is_integer_valued", "Configuration", "Program", "Transition",
    "make_transition", "ClosedForm", "Unsolvable", "solve_update",
]
