"""Command-line interface.

`nonterm prove FILE` prints the verdict (`NO` or `MAYBE`) as the first stdout
line, then for proven cases a witness block (configuration, model, concrete
trace) and optionally a proof log.  `nonterm bench FILES...` runs the prover
over many files and prints one verdict line per file plus a summary.

Exit codes: 0 non-termination proven, 1 inconclusive, 2 usage or parse
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import time
import traceback

from .koat import ArityError, NonIntegerLiteral, SyntaxErr, parse
from .oracle import FixpointLoop, ReplayPlan, step
from .program import Configuration, IllFormedProgram, transition_by_id, Original
from .smt.solver import SolverConfig, SolverProcess, default_solver_config
from .strategy import ProverConfig, Prover, Verdict

EXIT_PROVED = 0
EXIT_MAYBE = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nonterm",
        description="Prove non-termination of integer transition systems.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--timeout", type=float, default=60.0, metavar="SECS",
                       help="wall-clock budget per input (default 60)")
        p.add_argument("--smt-timeout", type=int, default=2000, metavar="MS",
                       help="per-query SMT timeout in ms (default 2000)")
        p.add_argument("--strengthen-budget", type=int, default=3, metavar="N",
                       help="invariant-inference passes per loop lineage (default 3)")
        p.add_argument("--validate-steps", type=int, default=1000, metavar="N",
                       help="simulated iterations when validating a witness")
        p.add_argument("--seed", type=int, default=0, metavar="N",
                       help="seed for randomized test sampling")
        p.add_argument("--solver", default=None, metavar="PATH",
                       help="SMT solver command speaking SMT-LIB 2 on stdin "
                            "(default: z3, the bundled z3 WebAssembly shim, "
                            "or the bundled fallback solver)")
        p.add_argument("--proof", choices=("none", "steps", "full"),
                       default="none", help="proof-log verbosity")

    prove = sub.add_parser("prove", help="prove non-termination of one file")
    prove.add_argument("file")
    common(prove)

    bench = sub.add_parser("bench", help="run the prover over many files")
    bench.add_argument("files", nargs="+")
    common(bench)
    return ap


def _prover_config(args) -> ProverConfig:
    return ProverConfig(
        timeout_s=args.timeout, smt_timeout_ms=args.smt_timeout,
        strengthen_budget=args.strengthen_budget,
        validate_steps=args.validate_steps, seed=args.seed,
        solver_command=args.solver)


def _render_trace(verdict: Verdict) -> list[str]:
    """Replay the plan concretely, one step per line."""
    plan: ReplayPlan = verdict.plan
    lines = []
    config = verdict.witness
    for s in plan.prefix:
        t = transition_by_id(s.transition_id)
        nxt = step(config, t, dict(s.temps))
        label = t.provenance.rule_index if isinstance(t.provenance, Original) else t.id
        lines.append(f"  rule {label}: {config} -> {nxt}")
        config = nxt
    if plan.tail is not None:
        kind = "fixpoint" if isinstance(plan.tail, FixpointLoop) else "recurrent"
        body = ", ".join(
            str(transition_by_id(s.transition_id).provenance.rule_index
                if isinstance(transition_by_id(s.transition_id).provenance, Original)
                else s.transition_id)
            for s in plan.tail.body)
        lines.append(f"  {kind} loop from {config} (rules {body})")
    return lines


def _print_verdict(verdict: Verdict, proof: str):
    print(verdict.status)
    if verdict.proved:
        print(f"witness: {verdict.witness}")
        print("model:")
        for name in sorted(verdict.model):
            print(f"  {name} = {verdict.model[name]}")
        print("trace:")
        for line in _render_trace(verdict):
            print(line)
    elif verdict.reason:
        print(f"reason: {verdict.reason}")
    if proof != "none":
        print("proof:")
        for line in verdict.proof_log:
            print(f"  {line}")
        if proof == "full" and verdict.sink_transition is not None:
            print(f"  final: {verdict.sink_transition}")


def cmd_prove(args) -> int:
    try:
        with open(args.file) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"nonterm: cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        program = parse(text)
    except (SyntaxErr, ArityError, NonIntegerLiteral, IllFormedProgram) as exc:
        print(f"nonterm: parse error in {args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = _prover_config(args)
    solver = SolverProcess(default_solver_config(config.smt_timeout_ms,
                                                 config.solver_command))
    try:
        verdict = Prover(program, config, solver).prove()
    finally:
        solver.close()
    _print_verdict(verdict, args.proof)
    return EXIT_PROVED if verdict.proved else EXIT_MAYBE


def cmd_bench(args) -> int:
    config = _prover_config(args)
    totals = {"NO": 0, "MAYBE": 0, "error": 0}
    t0 = time.monotonic()
    for path in args.files:
        started = time.monotonic()
        try:
            with open(path) as fh:
                program = parse(fh.read())
            solver = SolverProcess(default_solver_config(
                config.smt_timeout_ms, config.solver_command))
            try:
                verdict = Prover(program, config, solver).prove()
            finally:
                solver.close()
            status = verdict.status
        except (SyntaxErr, ArityError, NonIntegerLiteral,
                IllFormedProgram, OSError) as exc:
            status = f"error ({exc})"
        elapsed = time.monotonic() - started
        key = status.split(" ")[0] if status.startswith("error") else status
        totals[key] = totals.get(key, 0) + 1
        print(f"{status:8s} {elapsed:6.2f}s  {path}")
    print(f"total: {totals.get('NO', 0)} NO, {totals.get('MAYBE', 0)} MAYBE, "
          f"{totals.get('error', 0)} errors in {time.monotonic() - t0:.2f}s")
    return EXIT_PROVED


def main(argv=None) -> int:
    ap = build_arg_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        if args.command == "prove":
            return cmd_prove(args)
        return cmd_bench(args)
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
