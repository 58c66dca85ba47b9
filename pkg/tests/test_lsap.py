from __future__ import annotations

import numpy as np
import pytest

from floormatch.lsap import (
    InfeasibleProblem,
    PartialProblem,
    SolveResult,
    _location_potentials,
    arc_matrix,
    base_solve,
    chain_distances,
    solve_max_assignment,
    solve_max_matching_value,
)
from floormatch.oracles import best_matching_brute, random_small_instance


class TestBaseSolve:
    def test_hand_checked_two_by_two(self):
        scores = np.array([[1.0, 0.3], [0.6, 0.2]])
        total, locs = base_solve(scores, [0, 1], [1, 1])
        # 1.0 + 0.2 = 1.2 beats 0.3 + 0.6 = 0.9
        assert total == pytest.approx(1.2)
        assert list(locs) == [0, 1]

    def test_capacity_slots(self):
        scores = np.array([[1.0], [0.5]])
        total, locs = base_solve(scores, [0, 1], [2])
        assert total == pytest.approx(1.5)
        assert list(locs) == [0, 0]

    def test_agent_subset_rows(self):
        scores = np.array([[9.0, 9.0], [0.2, 0.7], [0.4, 0.1]])
        total, locs = base_solve(scores, [1, 2], [1, 1])
        assert total == pytest.approx(0.7 + 0.4)
        assert list(locs) == [1, 0]

    def test_empty_pool(self):
        total, locs = base_solve(np.zeros((2, 2)), [], [1, 1])
        assert total == 0.0
        assert locs.size == 0

    def test_infeasible(self):
        with pytest.raises(InfeasibleProblem):
            base_solve(np.zeros((3, 2)), [0, 1, 2], [1, 1])


class TestPartialProblem:
    def test_duplicate_agents_rejected(self):
        with pytest.raises(ValueError):
            PartialProblem((0, 0), (1, 1), np.zeros((1, 2)))

    def test_negative_capacity_rejected(self):
        with pytest.raises(ValueError):
            PartialProblem((0,), (1, -1), np.zeros((1, 2)))


class TestSolveMaxAssignment:
    def test_lexicographic_on_full_tie(self):
        scores = np.full((3, 3), 0.5)
        res = solve_max_assignment(PartialProblem((0, 1, 2), (2, 1, 1), scores))
        assert res.total == pytest.approx(1.5)
        assert res.assignment == {0: 0, 1: 0, 2: 1}

    def test_partial_tie(self):
        # agents 0 and 1 tie between A and B; lexicographic pick resolves both
        scores = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 0.4]])
        res = solve_max_assignment(PartialProblem((0, 1, 2), (1, 1, 1), scores))
        assert res.assignment == {0: 0, 1: 1, 2: 2}

    def test_empty(self):
        res = solve_max_assignment(PartialProblem((), (1,), np.zeros((0, 1))))
        assert res == SolveResult(0.0, {})

    def test_matches_brute_force_exactly(self):
        # binary-grid scores make cross-route totals comparable with ==
        rng = np.random.default_rng(7)
        for _ in range(150):
            inst = random_small_instance(rng, max_n=5, max_locations=4)
            brute_total, brute_locs = best_matching_brute(inst)
            res = solve_max_assignment(
                PartialProblem(tuple(range(inst.n)), inst.capacities, inst.outcomes)
            )
            assert res.total == brute_total
            assert tuple(res.assignment[i] for i in range(inst.n)) == brute_locs

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        inst = random_small_instance(rng, max_n=5, max_locations=4)
        prob = PartialProblem(tuple(range(inst.n)), inst.capacities, inst.outcomes)
        first = solve_max_assignment(prob)
        for _ in range(5):
            assert solve_max_assignment(prob) == first


class TestSolveMaxMatchingValue:
    def test_two_agent_fixture(self):
        scores = np.array([[0.1, 0.5, 0.9], [0.1, 0.9, 0.5]])
        assert solve_max_matching_value(scores, (1, 1, 1)) == pytest.approx(0.9)

    def test_no_agents(self):
        with pytest.raises(InfeasibleProblem):
            solve_max_matching_value(np.zeros((0, 2)), (1, 1))


class TestResidualGraph:
    def test_arc_matrix_hand_example(self):
        scores = np.array([[1.0, 0.3], [0.6, 0.2]])
        arc = arc_matrix(scores, np.array([0, 1]), np.array([0, 1]), 2)
        assert arc[0, 1] == pytest.approx(0.7)
        assert arc[1, 0] == pytest.approx(-0.4)
        assert np.isinf(arc[0, 0]) and np.isinf(arc[1, 1])

    def test_arc_matrix_group_min(self):
        # two agents share location 0; the cheaper mover defines the arc
        scores = np.array([[1.0, 0.1], [0.5, 0.4]])
        arc = arc_matrix(scores, np.array([0, 1]), np.array([0, 0]), 2)
        assert arc[0, 1] == pytest.approx(0.1)  # agent 1 moves for 0.5 - 0.4
        assert np.isinf(arc[1, 0])  # nobody sits at location 1

    def test_arc_matrix_empty_pool(self):
        arc = arc_matrix(np.zeros((0, 2)), np.empty(0, dtype=int), np.empty(0, dtype=int), 2)
        assert np.all(np.isinf(arc))

    def test_chain_distances(self):
        arc = np.array([[np.inf, 0.7], [-0.4, np.inf]])
        assert list(chain_distances(arc, np.array([False, True]))) == [
            pytest.approx(0.7),
            0.0,
        ]
        assert list(chain_distances(arc, np.array([True, False]))) == [
            0.0,
            pytest.approx(-0.4),
        ]

    def test_potentials_certify_optimality(self):
        # documented contract: pi = 0 on slack locations and every agent's
        # reduced profit is maximal at its assigned location
        rng = np.random.default_rng(11)
        for _ in range(60):
            inst = random_small_instance(rng, max_n=5, max_locations=4)
            agents = np.arange(inst.n)
            caps = np.asarray(inst.capacities)
            _, locs = base_solve(inst.outcomes, agents, caps)
            pi = _location_potentials(inst.outcomes, agents, locs, caps)
            flow = np.bincount(locs, minlength=caps.size)
            assert np.all(pi[flow < caps] <= 1e-12)
            for j, cur in zip(agents, locs):
                have = inst.outcomes[j, cur] - pi[cur]
                best = np.max(inst.outcomes[j] - pi)
                assert have >= best - 1e-9
