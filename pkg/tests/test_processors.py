import random
from fractions import Fraction

import pytest

from nonterm.monotonicity import partition_guard
from nonterm.oracle import differential_accelerate_check
from nonterm.poly import Constraint, Poly, UpdateMap
from nonterm.processors import (Inapplicable, accelerate, chain, make_fixpoint,
                                make_nonterm, sign_alternating_var, strengthen,
                                unstable_vars)
from nonterm.program import Accelerated, Transition, make_transition, rename_apart
from nonterm.recurrence import solve_update
from nonterm.smt.solver import check_sat

from .loops import (C, ge, gt, le, lt, eq, two_phase_transitions,
                    zero_reset_loop, alternating_loop, const_reset_loop,
                    swap_loop, X, Y, Z, ONE)

K = Poly.var("k")
HALF = Fraction(1, 2)
SINK = "!sink"


def accelerated_two_phase_first_loop(solver, counter="k"):
    f_loop = two_phase_transitions()[1]
    strengthened = strengthen(f_loop, C(ge("y")))
    part = partition_guard(strengthened, solver)
    cf = solve_update(strengthened.update, strengthened.args, counter)
    return strengthened, accelerate(strengthened, part, cf)


class TestChain:
    def test_zero_reset_with_itself(self):
        loop = zero_reset_loop()
        doubled = chain(loop, loop)
        assert doubled.update == UpdateMap.of({"x": Poly.zero(), "y": Y - X})
        assert [str(a.poly) for a in doubled.guard] == ["-1 + y", "-1 - x + y"]

    def test_entry_into_accelerated_loop(self, solver):
        _, accelerated = accelerated_two_phase_first_loop(solver)
        entry = two_phase_transitions()[0]
        composed = chain(entry, accelerated)
        assert composed.source == "start" and composed.target == "f"
        assert composed.update.get("x") == \
            X - Y * K - K.pow(2).scale(HALF) + K.scale(HALF)
        assert composed.update.get("y") == Y + K
        assert composed.guard == accelerated.guard  # entry guard is empty

    def test_identity_transition_is_neutral(self):
        loop = zero_reset_loop()
        identity = make_transition("f", ("x", "y"), C(), {}, "f")
        assert chain(identity, loop).guard == loop.guard
        assert chain(identity, loop).update == loop.update

    def test_guard_simplification_merges_bounds(self):
        loop = const_reset_loop()
        doubled = chain(loop, loop)
        assert [str(a.poly) for a in doubled.guard] == ["-2 + x"]
        assert doubled.update == UpdateMap.of(
            {"x": X - Poly.const(2), "y": Poly.const(2), "z": Poly.const(2)})

    def test_swap_with_itself(self):
        loop = swap_loop()
        doubled = chain(loop, loop)
        assert doubled.update == UpdateMap.of(
            {"x": X - Poly.const(2), "y": Y - Poly.const(2)})
        assert [str(a.poly) for a in doubled.guard] == ["-1 + x", "-2 + y"]

    def test_symbol_mismatch(self):
        loop = zero_reset_loop()
        other = make_transition("g", ("x", "y"), C(), {}, "g")
        with pytest.raises(Inapplicable):
            chain(loop, other)

    def test_counters_renamed_apart_before_chaining(self, solver):
        _, accelerated = accelerated_two_phase_first_loop(solver)
        second = rename_apart(accelerated, accelerated.variables())
        composed = chain(accelerated, second)
        assert len(set(composed.temp_vars)) == 2


class TestAccelerate:
    def test_two_phase_first_loop(self, solver):
        _, accelerated = accelerated_two_phase_first_loop(solver)
        # guard: y >= 0, the shifted descent bound, k > 0
        assert [str(a.poly) for a in accelerated.guard] == [
            "y",
            "-2 + 3*k - 2*k*y - k^2 + 2*x + 2*y",
            "-1 + k",
        ]
        assert accelerated.update.get("x") == \
            X - Y * K - K.pow(2).scale(HALF) + K.scale(HALF)
        assert accelerated.temp_vars[-1] == "k"
        assert isinstance(accelerated.provenance, Accelerated)

    def test_unconditional_count_up(self, solver):
        loop = make_transition("f", ("x",), C(), {"x": X + ONE}, "f")
        part = partition_guard(loop, solver)
        cf = solve_update(loop.update, loop.args, "k")
        accelerated = accelerate(loop, part, cf)
        assert accelerated.update == UpdateMap.of({"x": X + K})
        assert [str(a.poly) for a in accelerated.guard] == ["-1 + k"]

    def test_swap_loop_after_self_chaining(self, solver):
        doubled = chain(swap_loop(), swap_loop())
        part = partition_guard(doubled, solver)
        cf = solve_update(doubled.update, doubled.args, "k")
        accelerated = accelerate(doubled, part, cf)
        assert accelerated.update == UpdateMap.of(
            {"x": X - K.scale(2), "y": Y - K.scale(2)})
        # shifted guard: x - 2(k-1) > 0 and y - 2(k-1) - 1 > 0, plus k > 0
        assert [str(a.poly) for a in accelerated.guard] == [
            "1 - 2*k + x", "-2*k + y", "-1 + k"]
        report = differential_accelerate_check(doubled, accelerated, solver,
                                               trials=25)
        assert report.all_passed, report.failures[:3]

    def test_requires_monotonic_guard(self, solver):
        g_loop = two_phase_transitions()[3]
        part = partition_guard(g_loop, solver)
        cf = solve_update(g_loop.update, g_loop.args, "k")
        with pytest.raises(Inapplicable):
            accelerate(g_loop, part, cf)

    def test_refuses_exponential_closed_forms(self, solver):
        loop = make_transition("f", ("x",), C(le("x", 100)),
                               {"x": X.scale(2)}, "f")
        part = partition_guard(loop, solver)
        cf = solve_update(loop.update, loop.args, "k")
        assert cf.has_exponentials()
        with pytest.raises(Inapplicable):
            accelerate(loop, part, cf)


class TestSinkProcessors:
    def test_recurrent_set_needs_proven_invariance(self, solver):
        loop = zero_reset_loop()
        with pytest.raises(Inapplicable):
            make_nonterm(loop, solver, SINK)
        doubled = chain(loop, loop)
        result = make_nonterm(doubled, solver, SINK)
        assert result.target == SINK
        assert result.guard == doubled.guard
        assert result.update == UpdateMap.identity()

    def test_recurrent_set_with_strengthened_growth(self, solver):
        g_loop = two_phase_transitions()[3]
        strengthened = strengthen(g_loop, C(le("x")))
        result = make_nonterm(strengthened, solver, SINK)
        assert [str(a.poly) for a in result.guard] == ["-1 + y", "-x"]

    def test_unconditional_loop(self, solver):
        loop = make_transition("f", ("x",), C(), {"x": X + ONE}, "f")
        result = make_nonterm(loop, solver, SINK)
        assert result.guard.is_true()

    def test_fixpoint_region(self, solver):
        loop = zero_reset_loop()
        result = make_fixpoint(loop, solver, SINK)
        model = check_sat(result.guard, solver).model
        assert result.guard.holds({"x": 0, "y": 1})
        assert result.guard.holds(model)

    def test_fixpoint_identity_update_keeps_guard_only(self, solver):
        loop = make_transition("f", ("x", "y"), C(ge("x")), {}, "f")
        result = make_fixpoint(loop, solver, SINK)
        assert [str(a.poly) for a in result.guard] == ["x"]

    def test_fixpoint_inapplicable_when_update_moves(self, solver):
        loop = make_transition("f", ("x",), C(ge("x")), {"x": X + ONE}, "f")
        with pytest.raises(Inapplicable):
            make_fixpoint(loop, solver, SINK)


class TestStrengthen:
    def test_adds_atoms(self):
        f_loop = two_phase_transitions()[1]
        strengthened = strengthen(f_loop, C(ge("y")))
        assert [str(a.poly) for a in strengthened.guard] == ["x", "y"]

    def test_true_leaves_guard_unchanged(self):
        f_loop = two_phase_transitions()[1]
        assert strengthen(f_loop, Constraint.true()).guard == f_loop.guard

    def test_records_added_atoms(self):
        f_loop = two_phase_transitions()[1]
        strengthened = strengthen(f_loop, C(ge("y")), split=True)
        assert strengthened.provenance.split
        assert [str(a.poly) for a in strengthened.provenance.added] == ["y"]


class TestChainingHeuristics:
    def test_sign_alternation_detected(self):
        assert sign_alternating_var(alternating_loop()) == "x"

    def test_coefficient_one_is_not_alternation(self):
        f_loop = two_phase_transitions()[1]
        assert sign_alternating_var(f_loop) is None

    def test_alternation_with_independent_offset(self):
        loop = make_transition("f", ("x", "y"), C(), {"x": -X + Y}, "f")
        assert sign_alternating_var(loop) == "x"
        entangled = make_transition("f", ("x", "y"), C(), {"x": -X + X * Y}, "f")
        assert sign_alternating_var(entangled) is None

    def test_unstable_vars(self):
        assert unstable_vars(const_reset_loop()) == {"z"}
        assert unstable_vars(swap_loop()) == {"x", "y"}
        assert unstable_vars(make_transition("f", ("x",), C(), {}, "f")) == set()


def random_monotonic_loop(rng: random.Random) -> Transition:
    """A simple loop whose guard partitions with an empty non-monotonic part.

    Built from verified shapes: a decreasing counter with a lower bound (the
    bound is monotonically decreasing), an increasing counter with a lower
    bound (a simple invariant), and a coupled pair where one variable drops
    by a nonnegative other (decreasing modulo that invariant).
    """
    n_vars = rng.randint(1, 3)
    vs = ["x", "y", "z"][:n_vars]
    update = {}
    atoms = []
    coupled = None
    if n_vars >= 2 and rng.random() < 0.5:
        lo = rng.randint(0, 3)
        update["y"] = Y + Poly.const(rng.randint(0, 3))
        atoms += ge(Y - Poly.const(lo))
        update["x"] = X - Y
        atoms += ge(X - Poly.const(rng.randint(-5, 5)))
        coupled = {"x", "y"}
    for v in vs:
        if coupled and v in coupled:
            continue
        p = Poly.var(v)
        kind = rng.choice(["down", "up", "free"])
        if kind == "down":
            update[v] = p - Poly.const(rng.randint(1, 4))
            atoms += ge(p - Poly.const(rng.randint(-5, 5)))
        elif kind == "up":
            update[v] = p + Poly.const(rng.randint(0, 4))
            atoms += ge(p - Poly.const(rng.randint(-5, 5)))
        else:
            update[v] = p - Poly.const(rng.randint(0, 3))
    return make_transition("f", tuple(vs), Constraint(tuple(atoms)), update, "f")


class TestDifferentialSoundness:
    def test_paper_style_loops(self, solver):
        strengthened, accelerated = accelerated_two_phase_first_loop(solver)
        report = differential_accelerate_check(strengthened, accelerated,
                                               solver, trials=50)
        assert report.trials >= 25
        assert report.all_passed, report.failures[:3]

    @pytest.mark.parametrize("builder", [alternating_loop, const_reset_loop,
                                         swap_loop])
    def test_self_chained_special_loops(self, solver, builder):
        loop = builder()
        doubled = chain(loop, loop)
        part = partition_guard(doubled, solver)
        assert part.is_monotonic()
        cf = solve_update(doubled.update, doubled.args, "k")
        accelerated = accelerate(doubled, part, cf)
        report = differential_accelerate_check(doubled, accelerated, solver,
                                               trials=25)
        assert report.all_passed, report.failures[:3]

    def test_random_monotonic_loops(self, solver):
        rng = random.Random(4242)
        for _ in range(25):
            loop = random_monotonic_loop(rng)
            part = partition_guard(loop, solver)
            assert part.is_monotonic(), str(loop)
            cf = solve_update(loop.update, loop.args, "k")
            accelerated = accelerate(loop, part, cf)
            report = differential_accelerate_check(
                loop, accelerated, solver, trials=4,
                rng=random.Random(rng.randint(0, 10**6)))
            assert report.all_passed, (str(loop), report.failures[:3])

    def test_mutation_without_iteration_bound_fails(self, solver):
        strengthened, accelerated = accelerated_two_phase_first_loop(solver)
        # Corrupted acceleration: drop the shifted descent bound entirely.
        part = partition_guard(strengthened, solver)
        corrupted = Transition(
            source=accelerated.source, args=accelerated.args,
            guard=part.phi_ci.conjoin(part.phi_si).conjoin(
                C(gt("k"))),
            update=accelerated.update, target=accelerated.target,
            temp_vars=accelerated.temp_vars,
            provenance=Accelerated(strengthened.id, "k"))
        report = differential_accelerate_check(strengthened, corrupted, solver,
                                               trials=40)
        assert report.failures, "corrupted acceleration must be caught"
