from __future__ import annotations

import numpy as np
import pytest

from floormatch.mechanism import (
    InstanceInvalid,
    MechanismParams,
    ThresholdInfeasible,
    feasible_locations,
    run_mechanism,
)
from floormatch.model import (
    TOTAL_SCORE_TOL,
    is_feasible,
    is_g_acceptable,
    make_instance,
)
from floormatch.oracles import (
    best_matching_brute,
    example_holding,
    example_two_agent,
    random_small_instance,
)

GOLDEN_TWO_AGENT_TRACE = [
    "probe,1,0,0,0.5,pass,0",
    "assign,1,0,0,,,0",
    "probe,2,1,2,0.3,fail,0",
    "probe,2,1,1,0.5,pass,0",
    "assign,2,1,1,,,0",
]

GOLDEN_HOLDING_TRACE = [
    "probe,1,0,1,0.583333333333,fail,0",
    "hold,1,0,,,,0",
    "probe,2,1,2,0.816666666667,pass,0",
    "assign,2,1,2,,,0",
    "probe,3,2,0,0.733333333333,pass,0",
    "assign,3,2,0,,,0",
    "final,4,0,2,,,0",
]


class TestWorkedExample:
    def test_first_agent_priority(self):
        inst, g_bar = example_two_agent()
        out = run_mechanism(inst, MechanismParams(g_bar, (0, 1)))
        assert out.matching.locs == (0, 1)
        assert out.realized_total == pytest.approx(1.0)
        assert out.held_agents == ()
        assert out.trace.g_max == pytest.approx(0.9)

    def test_second_agent_priority(self):
        inst, g_bar = example_two_agent()
        out = run_mechanism(inst, MechanismParams(g_bar, (1, 0)))
        assert out.matching.locs == (2, 0)
        assert out.realized_total == pytest.approx(1.0)

    def test_golden_trace(self):
        inst, g_bar = example_two_agent()
        out = run_mechanism(inst, MechanismParams(g_bar, (0, 1)))
        assert out.trace.to_lines() == GOLDEN_TWO_AGENT_TRACE
        assert out.trace.probes_used == 0  # all probes answered incrementally
        assert out.trace.probe_evaluations == 3
        assert out.trace.holds_count == 0

    def test_infeasible_floor_rejected_up_front(self):
        inst, _ = example_two_agent()
        with pytest.raises(ThresholdInfeasible) as exc:
            run_mechanism(inst, MechanismParams(0.95))
        assert exc.value.g_bar == 0.95
        assert exc.value.g_max == pytest.approx(0.9)

    def test_floor_exactly_at_gmax_accepted(self):
        inst, _ = example_two_agent()
        out = run_mechanism(inst, MechanismParams(0.9))
        assert out.realized_mean == pytest.approx(0.9)

    def test_near_threshold_flags(self):
        # at floor 0.5 two probe completions sit exactly on n * g_bar
        inst, _ = example_two_agent()
        out = run_mechanism(inst, MechanismParams(0.5, (0, 1)))
        probe_near = [r.near for r in out.trace.records if r.kind == "probe"]
        assert probe_near == [True, False, True]
        assert out.trace.near_threshold_count == 2


class TestHoldingStep:
    def test_holding_run(self):
        inst, g_bar = example_holding()
        out = run_mechanism(inst, MechanismParams(g_bar))
        assert out.matching.locs == (2, 2, 0)
        assert out.held_agents == (0,)
        assert out.realized_total == pytest.approx(2.2)

    def test_golden_trace(self):
        inst, g_bar = example_holding()
        out = run_mechanism(inst, MechanismParams(g_bar))
        assert out.trace.to_lines() == GOLDEN_HOLDING_TRACE
        assert out.trace.probes_used == 1  # the terminal placement solve
        assert out.trace.probe_evaluations == 3
        assert out.trace.holds_count == 1

    def test_trace_disabled_keeps_counters(self):
        inst, g_bar = example_holding()
        out = run_mechanism(inst, MechanismParams(g_bar), record_trace=False)
        assert out.trace.records == ()
        assert out.trace.probes_used == 1
        assert out.trace.probe_evaluations == 3
        assert out.matching.locs == (2, 2, 0)


class TestCorruptionSwitches:
    """The deliberate-bug switches exist for the self-test battery; their
    direction of failure is part of the contract."""

    def test_fat_tolerance_leaks_the_floor(self):
        inst, g_bar = example_two_agent()
        out = run_mechanism(inst, MechanismParams(g_bar, (0, 1)), eps_tol=0.35)
        assert out.matching.locs == (0, 2)
        assert out.realized_total == pytest.approx(0.6)  # floor was 0.9
        assert not is_g_acceptable(inst, out.matching, g_bar)

    def test_omit_held_changes_holding_outcome(self):
        inst, g_bar = example_holding()
        out = run_mechanism(
            inst, MechanismParams(g_bar), omit_held_in_probes=True
        )
        assert out.matching.locs == (0, 2, 2)
        assert out.held_agents == (0, 1, 2)

    def test_inverted_verdicts_change_outcome(self):
        inst, g_bar = example_two_agent()
        honest = run_mechanism(inst, MechanismParams(g_bar, (0, 1)))
        flipped = run_mechanism(
            inst, MechanismParams(g_bar, (0, 1)), invert_probe_verdicts=True
        )
        assert flipped.matching.locs != honest.matching.locs


class TestValidation:
    def test_default_order_is_agent_index(self):
        inst, g_bar = example_two_agent()
        a = run_mechanism(inst, MechanismParams(g_bar))
        b = run_mechanism(inst, MechanismParams(g_bar, (0, 1)))
        assert a.matching == b.matching

    @pytest.mark.parametrize("order", [(0,), (0, 0), (1, 2), (0, 1, 2)])
    def test_bad_order_rejected(self, order):
        inst, g_bar = example_two_agent()
        with pytest.raises(InstanceInvalid):
            run_mechanism(inst, MechanismParams(g_bar, order))

    def test_bad_probe_mode_rejected(self):
        inst, g_bar = example_two_agent()
        with pytest.raises(InstanceInvalid):
            run_mechanism(inst, MechanismParams(g_bar), probe_mode="bogus")


class TestFeasibleLocations:
    def test_first_step_sets(self):
        inst, g_bar = example_two_agent()
        assert feasible_locations(inst, g_bar, 0, {}) == (0, 1, 2)
        assert feasible_locations(inst, 0.9, 0, {}) == (2,)

    def test_intermediate_state(self):
        inst, g_bar = example_two_agent()
        # with agent 0 pinned to A, agent 1 keeps the floor only via B
        assert feasible_locations(inst, g_bar, 1, {0: 0}) == (1,)

    def test_already_assigned_rejected(self):
        inst, g_bar = example_two_agent()
        with pytest.raises(InstanceInvalid):
            feasible_locations(inst, g_bar, 0, {0: 0})

    def test_capacity_overflow_rejected(self):
        inst, g_bar = example_holding()  # location 0 has capacity 1
        with pytest.raises(InstanceInvalid, match="capacity"):
            feasible_locations(inst, g_bar, 0, {1: 0, 2: 0})

    def test_out_of_range_keys_rejected(self):
        inst, g_bar = example_two_agent()
        with pytest.raises(InstanceInvalid, match="out of range"):
            feasible_locations(inst, g_bar, 1, {5: 0})
        with pytest.raises(InstanceInvalid, match="out of range"):
            feasible_locations(inst, g_bar, 5, {})


class TestRunInvariants:
    def test_random_runs_uphold_contract(self):
        rng = np.random.default_rng(17)
        for _ in range(150):
            inst = random_small_instance(rng)
            best_total, _ = best_matching_brute(inst)
            g_bar = float(rng.uniform(0, 1)) * best_total / inst.n
            order = tuple(int(a) for a in rng.permutation(inst.n))
            out = run_mechanism(inst, MechanismParams(g_bar, order))
            assert is_feasible(inst, out.matching)
            assert out.realized_total >= inst.n * g_bar - TOTAL_SCORE_TOL
            bound = inst.n * (inst.n_locations - 2) + 1
            assert out.trace.probes_used <= bound
            direct = run_mechanism(
                inst, MechanismParams(g_bar, order), probe_mode="direct"
            )
            assert direct.matching == out.matching
            assert direct.realized_total == out.realized_total

    def test_zero_floor_is_serial_dictatorship(self):
        # with full strict preferences and no binding floor, each agent takes
        # its best remaining location in priority order
        rng = np.random.default_rng(23)
        for _ in range(40):
            n = int(rng.integers(2, 5))
            scores = rng.integers(0, 33, size=(n, n)) / 32.0
            prefixes = [tuple(int(l) for l in rng.permutation(n)) for _ in range(n)]
            inst = make_instance(
                tuple(f"L{j}" for j in range(n)), (1,) * n, scores, prefixes
            )
            out = run_mechanism(inst, MechanismParams(0.0))
            taken = set()
            for agent in range(n):
                pick = next(
                    l for l in inst.preferences[agent].prefix if l not in taken
                )
                taken.add(pick)
                assert out.matching.locs[agent] == pick
