import pytest

from nonterm.oracle import step
from nonterm.poly import Poly
from nonterm.program import (Configuration, IllFormedProgram, Program, Renamed,
                             make_transition, rename_apart, transition_by_id)

from .loops import C, ge, gt, two_phase_program, X, Y, ONE


class TestProgramInvariants:
    def test_two_phase_program_well_formed(self):
        prog = two_phase_program()
        assert prog.arity() == 2
        assert not prog.is_simplified()
        assert {t.source for t in prog.simple_loops()} == {"f", "g"}

    def test_start_never_a_target(self):
        t = make_transition("f", ("x",), C(), {}, "start")
        with pytest.raises(IllFormedProgram):
            Program((t,), "start")

    def test_canonical_argument_list_enforced(self):
        t1 = make_transition("start", ("x", "y"), C(), {}, "f")
        t2 = make_transition("f", ("y", "x"), C(), {}, "f")
        with pytest.raises(IllFormedProgram):
            Program((t1, t2), "start")

    def test_simplified_detection(self):
        t = make_transition("start", ("x",), C(), {}, "f")
        assert Program((t,), "start").is_simplified()

    def test_reachability(self):
        prog = two_phase_program()
        assert prog.reachable_symbols() == {"start", "f", "g"}
        orphan = make_transition("h", ("x", "y"), C(), {"x": X + ONE}, "h")
        bigger = prog.with_transitions(prog.transitions + (orphan,))
        assert "h" not in bigger.reachable_symbols()


class TestRenameApart:
    def loop_with_counter(self):
        return make_transition(
            "f", ("x", "y"), C(ge("x"), gt("k")), {"x": X + Poly.var("k")},
            "f", temp_vars=("k",))

    def test_clash_renames_throughout(self):
        t = self.loop_with_counter()
        renamed = rename_apart(t, {"k"})
        assert renamed.temp_vars != ("k",)
        (fresh,) = renamed.temp_vars
        assert fresh in renamed.guard.variables()
        assert fresh in renamed.update.get("x").variables()
        assert "k" not in renamed.variables()
        assert isinstance(renamed.provenance, Renamed)
        assert transition_by_id(renamed.provenance.base_id) is t

    def test_no_clash_returns_same_object(self):
        t = self.loop_with_counter()
        assert rename_apart(t, {"z"}) is t

    def test_renaming_preserves_the_relation(self):
        t = self.loop_with_counter()
        renamed = rename_apart(t, {"k"})
        (fresh,) = renamed.temp_vars
        for x0, y0, kv in [(0, 0, 1), (5, -2, 3), (2, 7, 10)]:
            before = Configuration("f", (x0, y0))
            direct = step(before, t, {"k": kv})
            via_renamed = step(before, renamed, {fresh: kv})
            assert direct == via_renamed

    def test_arguments_never_renamed(self):
        t = self.loop_with_counter()
        renamed = rename_apart(t, {"x", "y", "k"})
        assert renamed.args == ("x", "y")
