from .formula import And, Formula, Not, Or, conj, disj, from_constraint, implies
from .solver import (SAT, UNKNOWN, UNSAT, ProtocolError, Session, SolverConfig,
                     SolverProcess, SolverUnavailable, SolverVerdict, check_sat,
                     check_valid_implication, default_solver_config, shared_solver)

__all__ = [
    "And", "Formula", "Not", "Or", "conj", "disj", "from_constraint", "implies",
    "SAT", "UNKNOWN", "UNSAT", "ProtocolError", "Session", "SolverConfig",
    "SolverProcess", "SolverUnavailable", "SolverVerdict", "check_sat",
    "check_valid_implication", "default_solver_config", "shared_solver",
]
