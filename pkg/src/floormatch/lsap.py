"""Capacity-aware maximum-total assignment with a deterministic tie-break.

The solver maximizes the summed outcome score of a subset of agents over
locations with residual capacities.  Capacities are handled by replicating
each location into unit slots (slot order follows location order), and the
base optimum comes from scipy's shortest-augmenting-path LSAP solver.

Among all optimal assignments the returned one is the lexicographically
smallest: agents in ascending index order, each assigned the smallest
location index consistent with some optimal completion.  Equality checks on
totals use exact float comparison; the arithmetic is deterministic, so two
calls with identical inputs return identical assignments.

Ties are found with a two-stage scheme: a dual-feasibility screen built from
shortest chain distances in the residual graph of the incumbent solution
rules out almost every candidate cheaply, and survivors are confirmed with an
exact re-solve.  On generic (untied) inputs the screen leaves nothing to
confirm, so the refinement costs one residual sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

# Dual screen slack: candidates whose profit falls short by more than this can
# never sit in an optimal assignment; survivors still get an exact confirm.
SCREEN_SLACK = 1e-7


class InfeasibleProblem(ValueError):
    """More agents than total residual capacity."""


@dataclass(frozen=True)
class PartialProblem:
    """Assignment subproblem over a subset of agents.

    scores is the full (n, L) outcome matrix; agents lists the participating
    row indices; capacities is the residual slot count per location.
    """

    agents: Tuple[int, ...]
    capacities: Tuple[int, ...]
    scores: np.ndarray

    def __post_init__(self) -> None:
        if len(set(self.agents)) != len(self.agents):
            raise ValueError("agent subset must be distinct")
        if any(c < 0 for c in self.capacities):
            raise ValueError("capacities must be nonnegative")


@dataclass(frozen=True)
class SolveResult:
    total: float
    assignment: Dict[int, int]  # agent index -> location index


def base_solve(
    scores: np.ndarray, agents: Sequence[int], capacities: Sequence[int]
) -> Tuple[float, np.ndarray]:
    """Optimal total and one optimal location vector (no tie-break promise).

    Returns (total, locs) with locs[i] the location of agents[i].  The total
    is re-accumulated in agent order so identical assignments always produce
    bit-identical totals regardless of solver internals.
    """
    agents = np.asarray(agents, dtype=np.intp)
    caps = np.asarray(capacities, dtype=np.intp)
    m = agents.size
    slot_loc = np.repeat(np.arange(caps.size), caps)
    if m > slot_loc.size:
        raise InfeasibleProblem(
            f"{m} agents but only {slot_loc.size} open slots"
        )
    if m == 0:
        return 0.0, np.empty(0, dtype=np.intp)
    benefit = scores[np.ix_(agents, slot_loc)]
    rows, cols = linear_sum_assignment(benefit, maximize=True)
    locs = np.empty(m, dtype=np.intp)
    locs[rows] = slot_loc[cols]
    total = float(np.sum(scores[agents, locs]))
    return total, locs


def arc_matrix(
    scores: np.ndarray, pool: np.ndarray, locs: np.ndarray, n_locations: int
) -> np.ndarray:
    """Residual move-cost matrix of an assignment.

    arc[u, v] = cheapest loss from moving one assigned agent off location u
    to location v, i.e. min over agents j at u of scores[j,u] - scores[j,v].
    Rows of locations holding no agent are +inf, as is the diagonal (a
    self-move is never part of a chain and would let chain walks tie on
    zero-cost self-loops).
    """
    arc = np.full((n_locations, n_locations), np.inf)
    if pool.size == 0:
        return arc
    vals = scores[pool]  # (m, L)
    diffs = vals[np.arange(pool.size), locs][:, None] - vals
    order = np.argsort(locs, kind="stable")
    sorted_locs = locs[order]
    used, starts = np.unique(sorted_locs, return_index=True)
    mins = np.minimum.reduceat(diffs[order], starts, axis=0)
    arc[used] = mins
    np.fill_diagonal(arc, np.inf)
    return arc


def chain_distances(arc: np.ndarray, target_mask: np.ndarray) -> np.ndarray:
    """Shortest chain cost from every location to the target set.

    Bellman-Ford by repeated min-plus relaxation; the residual graph of an
    optimal assignment has no negative cycle, so this converges within L
    sweeps (a cap guards against float-noise cycling).
    """
    dist = np.where(target_mask, 0.0, np.inf)
    for _ in range(arc.shape[0] + 1):
        relaxed = np.minimum(dist, (arc + dist[None, :]).min(axis=1))
        if np.array_equal(relaxed, dist):
            return dist
        dist = relaxed
    return dist  # fixpoint not reached: only possible via float-noise cycles


def _location_potentials(
    scores: np.ndarray,
    pool: np.ndarray,
    locs: np.ndarray,
    capacities: np.ndarray,
) -> np.ndarray:
    """Dual potentials certifying optimality of the incumbent assignment.

    pi[l] = shortest residual chain cost from l into the slack set (or to
    location 0 when every location is saturated, where any reference works).
    Satisfies pi >= 0 with pi = 0 on slack locations, and for every agent j
    and location l: scores[j, locs_j] - pi[locs_j] >= scores[j, l] - pi[l].
    """
    n_loc = capacities.size
    arc = arc_matrix(scores, pool, locs, n_loc)
    flow = np.bincount(locs, minlength=n_loc)
    slack = flow < capacities
    if not slack.any():
        slack = np.zeros(n_loc, dtype=bool)
        slack[0] = True
    return chain_distances(arc, slack)


def solve_max_assignment(problem: PartialProblem) -> SolveResult:
    """Maximum-total assignment, lexicographically smallest among optima."""
    agents = np.array(sorted(problem.agents), dtype=np.intp)
    caps = np.array(problem.capacities, dtype=np.intp)
    scores = problem.scores
    total, locs = base_solve(scores, agents, caps)
    if agents.size == 0:
        return SolveResult(0.0, {})

    pi = _location_potentials(scores, agents, locs, caps)

    assignment: Dict[int, int] = {}
    pool = agents  # stays sorted ascending, so pool[0] is next to fix
    pool_locs = locs
    rem_caps = caps.copy()
    rem_total = total
    while pool.size:
        a = int(pool[0])
        cur = int(pool_locs[0])
        profit = scores[a, cur] - pi[cur]
        chosen = cur
        for l in range(cur):
            if rem_caps[l] <= 0:
                continue
            # dual screen: a strictly lower profit can never be optimal
            if scores[a, l] - pi[l] < profit - SCREEN_SLACK:
                continue
            trial_caps = rem_caps.copy()
            trial_caps[l] -= 1
            sub_total, sub_locs = base_solve(scores, pool[1:], trial_caps)
            if scores[a, l] + sub_total == rem_total:
                chosen = l
                pool, pool_locs = pool[1:], sub_locs
                rem_caps = trial_caps
                rem_total = sub_total
                if pool.size:  # incumbent changed: refresh the dual screen
                    pi = _location_potentials(scores, pool, pool_locs, rem_caps)
                break
        assignment[a] = chosen
        if chosen == cur:
            # keep incumbent minus this agent; duals stay valid because the
            # saturation pattern is unchanged (capacity and flow drop together)
            rem_caps[cur] -= 1
            rem_total -= scores[a, cur]
            pool, pool_locs = pool[1:], pool_locs[1:]
    return SolveResult(total, assignment)


def solve_max_matching_value(
    scores: np.ndarray, capacities: Sequence[int]
) -> float:
    """Best achievable mean outcome score with every agent assigned."""
    n = scores.shape[0]
    if n == 0:
        raise InfeasibleProblem("no agents")
    total, _ = base_solve(scores, np.arange(n), capacities)
    return total / n
