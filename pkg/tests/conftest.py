import pytest

from nonterm.smt.solver import SolverProcess, default_solver_config


@pytest.fixture(scope="session")
def solver():
    """One solver child process shared by the whole suite (sessions scope it)."""
    process = SolverProcess(default_solver_config())
    yield process
    process.close()
