"""Child-process SMT solving over the SMT-LIB 2 text protocol (logic QF_NIA).

The solver binary is configurable; by default the first of the following that
works is used:

  1. the command in $NONTERM_SOLVER,
  2. a `z3` binary on PATH (run as `z3 -in`),
  3. the bundled Node.js shim backed by the `z3-solver` WebAssembly package,
  4. the bundled pure-Python fallback solver (`nonterm.smt.minismt`).

A `SolverProcess` hosts one long-lived child and hands out stack-scoped
`Session`s.  All state commands are journaled so that a hung child can be
killed and transparently replayed; the interrupted query then reports
`unknown`, which every caller treats as the conservative answer.
"""

from __future__ import annotations

import os
import select
import shlex
import shutil
import subprocess
import sys
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..poly import Atom, Constraint
from ..program import Valuation
from .formula import (Formula, Not, conj, formula_to_sexpr, formula_variables,
                      from_constraint, parse_model)


class SolverUnavailable(RuntimeError):
    pass


class ProtocolError(RuntimeError):
    pass


SAT = "sat"
UNSAT = "unsat"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class SolverVerdict:
    status: str  # sat | unsat | unknown
    model: Optional[Valuation] = None

    @property
    def is_sat(self) -> bool:
        return self.status == SAT

    @property
    def is_unsat(self) -> bool:
        return self.status == UNSAT


@dataclass(frozen=True)
class SolverConfig:
    command: tuple[str, ...]
    env: tuple[tuple[str, str], ...] = ()
    timeout_ms: int = 2000
    # The z3 WebAssembly build's scoped timers can abort an unrelated later
    # command mid-parse, so the shim runs without (set-option :timeout ...)
    # and relies on the client-side kill-and-replay deadline instead.
    use_solver_timeout: bool = True
    # The emscripten runtime reads fd 0 directly and would race a stdin
    # protocol, so the shim gets dedicated pipe fds appended to its argv.
    argv_fds: bool = False


_discovered: Optional[SolverConfig] = None


def _shim_config(timeout_ms: int) -> Optional[SolverConfig]:
    node = shutil.which("node")
    if node is None:
        return None
    shim = os.path.join(os.path.dirname(__file__), "z3shim.js")
    candidates: list[tuple[tuple[str, str], ...]] = [()]
    try:
        root = subprocess.run(["npm", "root", "-g"], capture_output=True,
                              text=True, timeout=30).stdout.strip()
        if root:
            existing = os.environ.get("NODE_PATH")
            merged = f"{existing}{os.pathsep}{root}" if existing else root
            candidates.append((("NODE_PATH", merged),))
    except (OSError, subprocess.SubprocessError):
        pass
    for env in candidates:
        probe_env = dict(os.environ)
        probe_env.update(dict(env))
        try:
            ok = subprocess.run(
                [node, "-e", "require.resolve('z3-solver')"],
                capture_output=True, env=probe_env, timeout=30).returncode == 0
        except (OSError, subprocess.SubprocessError):
            ok = False
        if ok:
            return SolverConfig((node, shim), env, timeout_ms,
                                use_solver_timeout=False, argv_fds=True)
    return None


def default_solver_config(timeout_ms: int = 2000,
                          command: Optional[str] = None) -> SolverConfig:
    """Resolve the solver command, honoring an explicit `--solver` value."""
    global _discovered
    if command:
        parts = shlex.split(command)
        if len(parts) == 1 and os.path.basename(parts[0]).startswith("z3"):
            parts.append("-in")
        return SolverConfig(tuple(parts), (), timeout_ms)
    env_cmd = os.environ.get("NONTERM_SOLVER")
    if env_cmd:
        return SolverConfig(tuple(shlex.split(env_cmd)), (), timeout_ms)
    if _discovered is not None:
        return SolverConfig(_discovered.command, _discovered.env, timeout_ms,
                            _discovered.use_solver_timeout,
                            _discovered.argv_fds)
    z3 = shutil.which("z3")
    if z3 is not None:
        _discovered = SolverConfig((z3, "-in"), (), timeout_ms)
        return default_solver_config(timeout_ms)
    shim = _shim_config(timeout_ms)
    if shim is not None:
        _discovered = shim
        return default_solver_config(timeout_ms)
    _discovered = SolverConfig(
        (sys.executable, "-m", "nonterm.smt.minismt"), (), timeout_ms)
    return default_solver_config(timeout_ms)


class _LineReader:
    """Deadline-aware line reader over a pipe file descriptor."""

    def __init__(self, fd: int):
        self.fd = fd
        self.buf = b""

    def readline(self, deadline: float) -> Optional[str]:
        while b"\n" not in self.buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([self.fd], [], [], remaining)
            if not ready:
                return None
            chunk = os.read(self.fd, 65536)
            if not chunk:
                raise ProtocolError("solver closed its output stream")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return line.decode()


class SolverProcess:
    """One solver child process with a journaled assertion stack."""

    def __init__(self, config: Optional[SolverConfig] = None):
        self.config = config or default_solver_config()
        self.proc: Optional[subprocess.Popen] = None
        self.reader: Optional[_LineReader] = None
        # Journal of state commands: frame 0 is the base level, each further
        # frame corresponds to one pending push.
        self.frames: list[list[str]] = [[]]
        self.declared: list[set[str]] = [set()]
        self.query_count = 0
        self.restart_count = 0

    # -- process management ------------------------------------------------

    def _prelude(self) -> list[str]:
        commands = []
        if self.config.use_solver_timeout:
            commands.append(f"(set-option :timeout {self.config.timeout_ms})")
        commands.append("(set-logic QF_NIA)")
        return commands

    def start(self):
        if self.proc is not None and self.proc.poll() is None:
            return
        env = dict(os.environ)
        env.update(dict(self.config.env))
        try:
            if self.config.argv_fds:
                cmd_r, cmd_w = os.pipe()
                resp_r, resp_w = os.pipe()
                os.set_inheritable(cmd_r, True)
                os.set_inheritable(resp_w, True)
                self.proc = subprocess.Popen(
                    list(self.config.command) + [str(cmd_r), str(resp_w)],
                    stdin=subprocess.DEVNULL, stdout=subprocess.DEVNULL,
                    stderr=subprocess.DEVNULL, env=env,
                    pass_fds=(cmd_r, resp_w), close_fds=True)
                os.close(cmd_r)
                os.close(resp_w)
                self._writer_fd = cmd_w
                self._reader_fd = resp_r
            else:
                self.proc = subprocess.Popen(
                    list(self.config.command), stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, env=env)
                self._writer_fd = None
                self._reader_fd = self.proc.stdout.fileno()
        except OSError as exc:
            raise SolverUnavailable(
                f"cannot start solver {' '.join(self.config.command)}: {exc}")
        self.reader = _LineReader(self._reader_fd)
        for cmd in self._prelude():
            self._send(cmd)
        for i, frame in enumerate(self.frames):
            if i > 0:
                self._send("(push 1)")
            for cmd in frame:
                self._send(cmd)

    def _close_fds(self):
        if getattr(self, "_writer_fd", None) is not None:
            try:
                os.close(self._writer_fd)
            except OSError:
                pass
            self._writer_fd = None
        if getattr(self, "_reader_fd", None) is not None and self.config.argv_fds:
            try:
                os.close(self._reader_fd)
            except OSError:
                pass
        self._reader_fd = None

    def close(self):
        if self.proc is not None:
            try:
                if self.proc.stdin is not None:
                    self.proc.stdin.close()
            except OSError:
                pass
            self._close_fds()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
            self.proc = None
            self.reader = None

    def _kill_and_restart(self):
        if self.proc is not None:
            self.proc.kill()
            self._close_fds()
            self.proc.wait()
            self.proc = None
        self.restart_count += 1
        self.start()

    def _send(self, command: str):
        assert self.proc is not None
        data = (command + "\n").encode()
        try:
            if self._writer_fd is not None:
                os.write(self._writer_fd, data)
            else:
                self.proc.stdin.write(data)
                self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SolverUnavailable(f"solver process died: {exc}")

    def _state(self, command: str):
        self.start()
        self.frames[-1].append(command)
        self._send(command)

    # -- stack and assertions ------------------------------------------------

    def push(self):
        self.start()
        self.frames.append([])
        self.declared.append(set())
        self._send("(push 1)")

    def pop(self):
        if len(self.frames) <= 1:
            raise ProtocolError("pop on an empty assertion stack")
        self.frames.pop()
        self.declared.pop()
        self._send("(pop 1)")

    @property
    def level(self) -> int:
        return len(self.frames) - 1

    def declare(self, names: Iterable[str]):
        live = set().union(*self.declared)
        for name in sorted(set(names) - live):
            self.declared[-1].add(name)
            self._state(f"(declare-const {name} Int)")

    def assert_formula(self, f: Formula):
        self.declare(formula_variables(f))
        self._state(f"(assert {formula_to_sexpr(f)})")

    # -- queries -------------------------------------------------------------

    def _read_status_line(self) -> Optional[str]:
        deadline = time.monotonic() + self.config.timeout_ms / 1000.0 + 2.0
        while True:
            line = self.reader.readline(deadline)
            if line is None:
                return None
            line = line.strip()
            if line in (SAT, UNSAT, UNKNOWN):
                return line
            if line in ("success", "unsupported", ""):
                continue
            raise ProtocolError(f"unexpected solver reply: {line!r}")

    def check(self) -> str:
        self.start()
        self.query_count += 1
        for attempt in (0, 1):
            self._send("(check-sat)")
            try:
                status = self._read_status_line()
            except ProtocolError:
                # The WebAssembly build's timeout timer can abort an
                # unrelated later command; replaying the journal and retrying
                # once recovers cleanly.
                self._kill_and_restart()
                if attempt:
                    raise
                continue
            if status is None:
                # Solver blew through its own timeout; recover by replaying.
                self._kill_and_restart()
                return UNKNOWN
            return status
        raise ProtocolError("unreachable")  # pragma: no cover

    def _read_model_text(self) -> Valuation:
        deadline = time.monotonic() + self.config.timeout_ms / 1000.0 + 2.0
        text, depth, started = "", 0, False
        while True:
            line = self.reader.readline(deadline)
            if line is None:
                raise ProtocolError("timeout while reading model")
            if line.strip() in ("success", ""):
                continue
            text += line + "\n"
            depth += line.count("(") - line.count(")")
            started = started or "(" in line
            if started and depth <= 0:
                break
        if "error" in text and "define-fun" not in text:
            raise ProtocolError(f"model request failed: {text.strip()}")
        return parse_model(text)

    def get_model(self) -> Valuation:
        assert self.proc is not None
        self._send("(get-model)")
        try:
            return self._read_model_text()
        except ProtocolError:
            # Same recovery as check(): replay, re-establish sat, re-ask.
            self._kill_and_restart()
            self._send("(check-sat)")
            if self._read_status_line() != SAT:
                raise
            self._send("(get-model)")
            return self._read_model_text()

    def check_with_model(self) -> SolverVerdict:
        status = self.check()
        if status == SAT:
            return SolverVerdict(SAT, self.get_model())
        return SolverVerdict(status)

    # -- sessions ------------------------------------------------------------

    def session(self) -> "Session":
        return Session(self)


class Session:
    """A push/pop-scoped view of a solver process.

    Entering pushes one level; leaving pops back to the entry level, so
    nested sessions compose and a shared process stays clean between uses.
    """

    def __init__(self, process: SolverProcess):
        self.process = process
        self.base_level: Optional[int] = None

    def __enter__(self) -> "Session":
        self.process.start()
        self.base_level = self.process.level
        self.process.push()
        return self

    def __exit__(self, *exc):
        while self.process.level > self.base_level:
            self.process.pop()
        return False

    def push(self):
        self.process.push()

    def pop(self):
        if self.process.level <= self.base_level + 1:
            raise ProtocolError("pop would escape the session scope")
        self.process.pop()

    def add(self, f: Formula):
        self.process.assert_formula(f)

    def add_atoms(self, atoms: Iterable[Atom]):
        for a in atoms:
            self.process.assert_formula(a)

    def check(self) -> str:
        return self.process.check()

    def check_with_model(self) -> SolverVerdict:
        return self.process.check_with_model()


# ---------------------------------------------------------------------------
# High-level queries
# ---------------------------------------------------------------------------

def check_sat(f: Formula | Constraint, solver: SolverProcess) -> SolverVerdict:
    """Satisfiability of a quantifier-free formula, with model on sat."""
    if isinstance(f, Constraint):
        f = from_constraint(f)
    with solver.session() as s:
        s.add(f)
        return s.check_with_model()


def check_valid_implication(premise: Formula | Constraint,
                            conclusion: Formula | Constraint,
                            solver: SolverProcess) -> Optional[bool]:
    """Validity of `premise => conclusion` over the integers.

    True means proven (negation unsatisfiable); False means a countermodel
    exists; None means the solver could not decide.  Callers must treat None
    like False wherever validity unlocks a transformation.
    """
    if isinstance(premise, Constraint):
        premise = from_constraint(premise)
    if isinstance(conclusion, Constraint):
        conclusion = from_constraint(conclusion)
    with solver.session() as s:
        s.add(conj([premise, Not(conclusion)]))
        status = s.check()
    if status == UNSAT:
        return True
    if status == SAT:
        return False
    return None


_default_process: Optional[SolverProcess] = None


def shared_solver(config: Optional[SolverConfig] = None) -> SolverProcess:
    """Process-wide solver instance, created lazily and reused across runs."""
    global _default_process
    if config is not None:
        return SolverProcess(config)
    if _default_process is None:
        _default_process = SolverProcess()
        import atexit
        atexit.register(_default_process.close)
    return _default_process
