"""Module-level randomized properties on the 0.05-score-grid instance family:
constrained efficiency and strategy-proofness of the mechanism under every
priority order, and the enumeration count against its closed form."""

from __future__ import annotations

import itertools
import math

import numpy as np

from floormatch.mechanism import MechanismParams, run_mechanism
from floormatch.model import TOTAL_SCORE_TOL, is_feasible, make_instance
from floormatch.oracles import (
    check_constrained_efficiency,
    enumerate_feasible_matchings,
    find_manipulation,
    max_average_brute,
)


def grid_instance(rng: np.random.Generator, max_n: int = 4, max_loc: int = 4):
    """n in {2..max_n}, |L| in {2..max_loc}, capacities in {1, 2} (redrawn
    until they cover n), scores on the 0.05 grid, all prefix depths."""
    n = int(rng.integers(2, max_n + 1))
    while True:
        n_loc = int(rng.integers(2, max_loc + 1))
        caps = tuple(int(c) for c in rng.integers(1, 3, size=n_loc))
        if sum(caps) >= n:
            break
    scores = rng.integers(0, 21, size=(n, n_loc)) * 0.05
    prefixes = []
    for _ in range(n):
        depth = int(rng.integers(0, n_loc + 1))
        prefixes.append(tuple(int(l) for l in rng.permutation(n_loc)[:depth]))
    locations = tuple(f"L{j + 1}" for j in range(n_loc))
    return make_instance(locations, caps, scores, prefixes)


def closed_form_count(n: int, capacities) -> int:
    """Number of capacity-respecting agent->location maps: sum of multinomial
    coefficients over admissible location occupancy vectors."""
    total = 0
    ranges = [range(min(c, n) + 1) for c in capacities]
    for occupancy in itertools.product(*ranges):
        if sum(occupancy) != n:
            continue
        coeff = math.factorial(n)
        for k in occupancy:
            coeff //= math.factorial(k)
        total += coeff
    return total


class TestEnumerationCount:
    def test_unit_capacity_cases(self):
        # unit capacities: count is the falling factorial L!/(L-n)!
        for n, n_loc in ((2, 2), (2, 3), (3, 3), (2, 4), (3, 4), (4, 4)):
            inst = make_instance(
                tuple(f"L{j}" for j in range(n_loc)),
                (1,) * n_loc,
                np.zeros((n, n_loc)),
                ((),) * n,
            )
            count = sum(1 for _ in enumerate_feasible_matchings(inst))
            assert count == math.perm(n_loc, n)
            assert count == closed_form_count(n, (1,) * n_loc)

    def test_random_mixed_capacity_cases(self):
        rng = np.random.default_rng(31)
        for _ in range(150):
            inst = grid_instance(rng)
            count = sum(1 for _ in enumerate_feasible_matchings(inst))
            assert count == closed_form_count(inst.n, inst.capacities)


class TestEveryPriorityOrder:
    def test_constrained_efficiency_everywhere(self):
        rng = np.random.default_rng(2024)
        for _ in range(500):
            inst = grid_instance(rng)
            g_bar = float(rng.uniform(0.0, max_average_brute(inst)))
            for order in itertools.permutations(range(inst.n)):
                out = run_mechanism(
                    inst, MechanismParams(g_bar, order), record_trace=False
                )
                assert is_feasible(inst, out.matching)
                assert out.realized_total >= inst.n * g_bar - TOTAL_SCORE_TOL
                assert check_constrained_efficiency(inst, g_bar, out.matching), (
                    inst, g_bar, order, out.matching,
                )

    def test_no_profitable_misreport_anywhere(self):
        # full admissible-report enumeration; n and |L| capped at 3 keeps
        # the order x report x agent product tractable
        rng = np.random.default_rng(7)
        for _ in range(60):
            inst = grid_instance(rng, max_n=3, max_loc=3)
            g_bar = float(rng.uniform(0.0, max_average_brute(inst)))
            for order in itertools.permutations(range(inst.n)):
                witness = find_manipulation(
                    lambda i: run_mechanism(
                        i, MechanismParams(g_bar, order), record_trace=False
                    ).matching,
                    inst,
                )
                assert witness is None, (inst, g_bar, order, witness)
