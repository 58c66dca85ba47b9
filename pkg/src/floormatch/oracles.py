"""Brute-force verification oracles and worked example instances.

Everything here favors transparency over speed: matchings are enumerated
recursively, optima are found by exhaustive comparison, and the incentive
checker literally tries every admissible misreport.  None of it touches the
optimized assignment machinery, so agreement between the two routes is
meaningful evidence of correctness.  Instances must be small (the enumeration
budget guards against accidental blowups).

Also ships `verify_mechanism_example_suite`, a self-contained battery of
worked examples with hand-checked expected outcomes.  Its corruption switches
(`eps_tol`, `omit_held_in_probes`) deliberately break the mechanism to prove
the battery can detect such bugs; see the suite docstring.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from .model import (
    TOTAL_SCORE_TOL,
    Instance,
    Matching,
    make_instance,
    pareto_dominates,
    realized_total,
)

DEFAULT_ENUMERATION_BUDGET = 10_000_000


class BudgetExceeded(RuntimeError):
    """Enumeration would yield more matchings than the budget allows."""


def enumerate_feasible_matchings(
    inst: Instance, max_matchings: int = DEFAULT_ENUMERATION_BUDGET
) -> Iterator[Tuple[int, ...]]:
    """Yield every capacity-respecting assignment as a tuple of location
    indices (agent order), in lexicographic order."""
    n, n_loc = inst.n, inst.n_locations
    residual = list(inst.capacities)
    cur: List[int] = []
    count = 0

    def rec(i: int) -> Iterator[Tuple[int, ...]]:
        nonlocal count
        if i == n:
            count += 1
            if count > max_matchings:
                raise BudgetExceeded(
                    f"more than {max_matchings} feasible matchings"
                )
            yield tuple(cur)
            return
        for loc in range(n_loc):
            if residual[loc] > 0:
                residual[loc] -= 1
                cur.append(loc)
                yield from rec(i + 1)
                residual[loc] += 1
                cur.pop()

    return rec(0)


def best_matching_brute(
    inst: Instance, max_matchings: int = DEFAULT_ENUMERATION_BUDGET
) -> Tuple[float, Tuple[int, ...]]:
    """Max-total matching by exhaustive search; lexicographic-smallest among
    exact-total ties.  Enumeration is lexicographic, so the first matching
    achieving the running maximum is the tie-winner."""
    best_total = -np.inf
    best: Optional[Tuple[int, ...]] = None
    for locs in enumerate_feasible_matchings(inst, max_matchings):
        t = realized_total(inst, Matching(locs))
        if t > best_total:
            best_total, best = t, locs
    if best is None:
        raise ValueError("instance admits no feasible matching")
    return float(best_total), best


def max_average_brute(
    inst: Instance, max_matchings: int = DEFAULT_ENUMERATION_BUDGET
) -> float:
    """Highest achievable average outcome score, by exhaustive search."""
    total, _ = best_matching_brute(inst, max_matchings)
    return total / inst.n


def find_dominating_matching(
    inst: Instance,
    g_bar: float,
    matching: Matching,
    *,
    eps_tol: float = TOTAL_SCORE_TOL,
    max_matchings: int = DEFAULT_ENUMERATION_BUDGET,
) -> Optional[Matching]:
    """First feasible floor-passing matching that Pareto-dominates the given
    one (every agent weakly better by its own preference, someone strictly),
    or None.  ``None`` certifies constrained efficiency."""
    floor = inst.n * g_bar - eps_tol
    for locs in enumerate_feasible_matchings(inst, max_matchings):
        cand = Matching(locs)
        if realized_total(inst, cand) < floor:
            continue
        if pareto_dominates(inst, cand, matching):
            return cand
    return None


def check_constrained_efficiency(
    inst: Instance,
    g_bar: float,
    matching: Matching,
    *,
    eps_tol: float = TOTAL_SCORE_TOL,
    max_matchings: int = DEFAULT_ENUMERATION_BUDGET,
) -> bool:
    """True iff the matching passes the floor and no floor-passing matching
    Pareto-dominates it."""
    if realized_total(inst, matching) < inst.n * g_bar - eps_tol:
        return False
    return (
        find_dominating_matching(
            inst, g_bar, matching, eps_tol=eps_tol, max_matchings=max_matchings
        )
        is None
    )


# -- incentive checking -------------------------------------------------------


def admissible_reports(n_locations: int) -> Iterator[Tuple[int, ...]]:
    """All submittable preference reports: strict orderings of location
    subsets of every size except n_locations - 1 (a report ranking all but
    one location pins the last one and is normalized to the full ordering,
    so that size adds nothing)."""
    for size in range(n_locations + 1):
        if size == n_locations - 1:
            continue
        yield from itertools.permutations(range(n_locations), size)


@dataclass(frozen=True)
class ManipulationWitness:
    agent: int
    report: Tuple[int, ...]
    truthful_location: int
    misreport_location: int


def find_manipulation(
    assign: Callable[[Instance], Matching],
    inst: Instance,
    agents: Optional[Iterable[int]] = None,
) -> Optional[ManipulationWitness]:
    """Search for a profitable preference misreport against a mechanism.

    ``assign`` maps an instance to a matching.  For each agent and each
    admissible alternative report, the agent's report is swapped in and the
    mechanism re-run; a witness is returned as soon as some agent obtains a
    location it strictly prefers (by its TRUE preference) to its truthful
    assignment.  Returns None when no agent can gain: the mechanism is
    strategy-proof on this instance.
    """
    truthful = assign(inst)
    location_ids = inst.locations
    for agent in agents if agents is not None else range(inst.n):
        true_pref = inst.preferences[agent]
        for report in admissible_reports(inst.n_locations):
            if report == true_pref.prefix:
                continue
            prefixes = [p.prefix for p in inst.preferences]
            prefixes[agent] = report
            altered = make_instance(
                location_ids, inst.capacities, inst.outcomes, tuple(prefixes)
            )
            outcome = assign(altered)
            if true_pref.strictly_prefers(
                outcome.locs[agent], truthful.locs[agent]
            ):
                return ManipulationWitness(
                    agent, report, truthful.locs[agent], outcome.locs[agent]
                )
    return None


# -- trading-cycles comparison mechanism ---------------------------------------


@dataclass(frozen=True)
class TradeCyclesOutcome:
    matching: Matching
    executed_cycles: Tuple[Tuple[int, ...], ...]
    stopped_early: bool  # a cycle was blocked by the floor


def run_constrained_ttc(
    inst: Instance,
    g_bar: float,
    *,
    eps_tol: float = TOTAL_SCORE_TOL,
    max_matchings: int = DEFAULT_ENUMERATION_BUDGET,
) -> TradeCyclesOutcome:
    """Trading-cycles mechanism seeded with the max-total matching, trading
    only while the floor holds.

    Agents start at the exhaustively computed max-total matching.  Each round,
    every active agent points at its most preferred reachable location (one
    held by an active agent, or one with residual free capacity; its own
    counts).  Among the cycles of the pointing graph, the one containing the
    lowest agent index trades first, one cycle per round.  A cycle only
    executes if the full matching's total still passes the floor afterwards;
    the first blocked cycle stops the whole procedure and every remaining
    agent keeps its current slot.

    Deterministic tie rules: within the indifference tail an agent points at
    its own location if reachable, else the lowest location index; a location
    held by several active agents is represented by the lowest-index one.
    """
    n = inst.n
    total, locs_t = best_matching_brute(inst, max_matchings)
    if total < n * g_bar - eps_tol:
        raise ValueError("floor exceeds the best achievable total")
    locs = list(locs_t)
    active: Set[int] = set(range(n))
    executed: List[Tuple[int, ...]] = []
    stopped = False

    while active:
        used = np.bincount(locs, minlength=inst.n_locations)
        free = [l for l in range(inst.n_locations) if used[l] < inst.capacities[l]]
        holder: Dict[int, int] = {}
        for a in sorted(active):
            holder.setdefault(locs[a], a)
        reachable = sorted(set(free) | set(holder))

        def points_to(a: int) -> int:
            pref = inst.preferences[a]
            best = min(reachable, key=lambda l: (pref.rank_of(l), l != locs[a], l))
            return best

        target = {a: points_to(a) for a in active}
        succ = {a: holder.get(target[a], a) for a in active}

        # cycles of the functional graph; trade the one holding the lowest index
        seen: Set[int] = set()
        cycles: List[List[int]] = []
        for start in sorted(active):
            if start in seen:
                continue
            path: List[int] = []
            on_path: Dict[int, int] = {}
            a = start
            while a not in seen and a not in on_path:
                on_path[a] = len(path)
                path.append(a)
                a = succ[a]
            if a in on_path:
                cycles.append(path[on_path[a]:])
            seen.update(path)
        cycle = min(cycles, key=min)

        delta = sum(
            float(inst.outcomes[a, target[a]] - inst.outcomes[a, locs[a]])
            for a in cycle
        )
        if total + delta < n * g_bar - eps_tol:
            stopped = True
            break
        for a in cycle:
            locs[a] = target[a]
        total += delta
        if any(locs[a] != locs_t[a] for a in cycle):
            executed.append(tuple(sorted(cycle)))
        active.difference_update(cycle)

    return TradeCyclesOutcome(Matching(tuple(locs)), tuple(executed), stopped)


# -- worked examples -----------------------------------------------------------


def example_two_agent() -> Tuple[Instance, float]:
    """Two agents, three unit locations, floor 0.45.

    Priority order decides everything here: first-mover gets location A and
    the other agent is pushed to its floor-compatible alternative.  The
    matching (B, C) is feasible, floor-passing, and undominated, yet no
    priority order produces it.
    """
    inst = make_instance(
        ("A", "B", "C"),
        (1, 1, 1),
        np.array([[0.1, 0.5, 0.9], [0.1, 0.9, 0.5]]),
        ((0, 1), (0, 2)),
    )
    return inst, 0.45


def example_holding() -> Tuple[Instance, float]:
    """Three agents where the first is put on hold and placed at the end.

    Agent 0 lists only location B, whose completions all miss the floor, so
    it is held through the sequential phase and receives the leftover slot
    at C; agents 1 and 2 get their top listed choices.
    """
    inst = make_instance(
        ("A", "B", "C"),
        (1, 2, 2),
        np.array(
            [[0.8, 0.0, 0.45], [0.75, 0.8, 0.95], [0.8, 0.35, 0.7]]
        ),
        ((1,), (2, 1, 0), (0,)),
    )
    return inst, 0.70


def example_trade_cycles() -> Tuple[Instance, float, int, Tuple[int, ...]]:
    """Fixture showing the floor-constrained trading-cycles variant is
    manipulable: (instance, floor, manipulating agent, profitable report).

    Truthfully, the only pointing cycle swaps agents 0 and 1 but would sink
    the total below the floor, so everyone keeps the seed matching and agent
    0 ends at A.  Reporting only C instead redirects the trade through agent
    2; that cycle passes the floor and hands agent 0 location C, which it
    truly strictly prefers to A.
    """
    inst = make_instance(
        ("A", "B", "C"),
        (1, 1, 1),
        np.array(
            [[0.9, 0.1, 0.6], [0.1, 0.8, 0.2], [0.4, 0.2, 0.7]]
        ),
        ((1, 2, 0), (0, 1, 2), (0, 2, 1)),
    )
    return inst, 0.5, 0, (2,)


# -- end-to-end example battery -------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def verify_mechanism_example_suite(
    *,
    eps_tol: float = TOTAL_SCORE_TOL,
    omit_held_in_probes: bool = False,
    invert_probe_verdicts: bool = False,
) -> List[CheckResult]:
    """Run every worked example through the real mechanism and compare with
    hand-checked expected outcomes and with the brute-force oracles.

    The keyword switches exist to corrupt the mechanism on purpose and
    prove this battery notices: a fat floor tolerance (try eps_tol=0.35)
    lets floor-violating matchings through, omit_held_in_probes makes
    probe values ignore agents on hold, and invert_probe_verdicts flips
    every floor comparison.  Each must turn at least one check red; the
    defaults must turn none.
    """
    # The suite is the single place the brute route and the fast route meet,
    # so the imports live here rather than at module level.
    from .lsap import solve_max_matching_value
    from .mechanism import MechanismParams, feasible_locations, run_mechanism

    results: List[CheckResult] = []

    def check(name: str, passed: bool, detail: str = "") -> None:
        results.append(CheckResult(name, bool(passed), detail))

    def run(inst, g_bar, order):
        return run_mechanism(
            inst,
            MechanismParams(g_bar=g_bar, order=order),
            eps_tol=eps_tol,
            omit_held_in_probes=omit_held_in_probes,
            invert_probe_verdicts=invert_probe_verdicts,
        )

    inst, g_bar = example_two_agent()
    brute_max = max_average_brute(inst)
    fast_max = solve_max_matching_value(inst.outcomes, inst.capacities)
    check(
        "two_agent.max_average",
        abs(brute_max - 0.9) < 1e-12 and abs(fast_max - brute_max) < 1e-12,
        f"brute {brute_max!r} fast {fast_max!r} expected 0.9",
    )

    out01 = run(inst, g_bar, (0, 1))
    ok01 = out01.matching.locs == (0, 1)
    acc01 = out01.realized_total >= inst.n * g_bar - TOTAL_SCORE_TOL
    eff01 = check_constrained_efficiency(inst, g_bar, out01.matching)
    check(
        "two_agent.order_01",
        ok01 and acc01 and eff01,
        f"got {out01.matching.locs} expected (0, 1); floor ok {acc01}; efficient {eff01}",
    )

    out10 = run(inst, g_bar, (1, 0))
    ok10 = out10.matching.locs == (2, 0)
    acc10 = out10.realized_total >= inst.n * g_bar - TOTAL_SCORE_TOL
    eff10 = check_constrained_efficiency(inst, g_bar, out10.matching)
    check(
        "two_agent.order_10",
        ok10 and acc10 and eff10,
        f"got {out10.matching.locs} expected (2, 0); floor ok {acc10}; efficient {eff10}",
    )

    alt = Matching((1, 2))
    alt_fine = (
        realized_total(inst, alt) >= inst.n * g_bar - TOTAL_SCORE_TOL
        and find_dominating_matching(inst, g_bar, alt) is None
    )
    check(
        "two_agent.undominated_alternative_unreached",
        alt_fine and alt.locs not in (out01.matching.locs, out10.matching.locs),
        "matching (1, 2) is floor-passing and undominated yet no order selects it",
    )

    fl_low = feasible_locations(inst, g_bar, 0, {}, eps_tol=eps_tol)
    fl_high = feasible_locations(inst, 0.9, 0, {}, eps_tol=eps_tol)
    check(
        "two_agent.first_step_feasible_sets",
        fl_low == (0, 1, 2) and fl_high == (2,),
        f"floor {g_bar}: {fl_low} expected (0, 1, 2); floor 0.9: {fl_high} expected (2,)",
    )

    scan = find_manipulation(
        lambda i: run_mechanism(
            i, MechanismParams(g_bar=g_bar, order=(0, 1)), eps_tol=eps_tol
        ).matching,
        inst,
    )
    check(
        "two_agent.no_profitable_misreport",
        scan is None,
        f"witness {scan}",
    )

    hinst, hbar = example_holding()
    hout = run(hinst, hbar, None)
    h_ok = (
        hout.matching.locs == (2, 2, 0)
        and hout.held_agents == (0,)
        and abs(hout.realized_total - 2.2) < 1e-9
    )
    check(
        "holding.run",
        h_ok,
        f"got {hout.matching.locs} held {hout.held_agents} expected (2, 2, 0) held (0,)",
    )
    check(
        "holding.efficient",
        check_constrained_efficiency(hinst, hbar, hout.matching),
        "held agent's terminal placement must not break constrained efficiency",
    )

    tinst, tbar, t_agent, t_report = example_trade_cycles()
    truthful = run_constrained_ttc(tinst, tbar, eps_tol=eps_tol)
    check(
        "trade_cycles.truthful_blocked",
        truthful.matching.locs == (0, 1, 2) and truthful.stopped_early,
        f"got {truthful.matching.locs} stopped {truthful.stopped_early}; "
        "expected the seed matching (0, 1, 2) kept",
    )
    witness = find_manipulation(
        lambda i: run_constrained_ttc(i, tbar, eps_tol=eps_tol).matching,
        tinst,
        agents=(t_agent,),
    )
    check(
        "trade_cycles.manipulable",
        witness is not None
        and witness.report == t_report
        and witness.misreport_location == 2
        and witness.truthful_location == 0,
        f"witness {witness}; expected agent 0 gaining C over A via report (2,)",
    )

    return results


# -- randomized property battery ------------------------------------------------


def random_small_instance(
    rng: np.random.Generator,
    *,
    max_n: int = 4,
    max_locations: int = 4,
    max_capacity: int = 2,
    score_denominator: int = 32,
) -> Instance:
    """Random instance sized for exhaustive checking.

    Scores are multiples of 1/score_denominator; with a power-of-two
    denominator every score and every partial total is exact in binary
    floating point, so totals computed along different routes can be compared
    with ``==``.  Preference prefixes take every admissible length, including
    empty (all-indifferent) and full strict orders.
    """
    n = int(rng.integers(2, max_n + 1))
    n_loc = int(rng.integers(2, max_locations + 1))
    caps = rng.integers(1, max_capacity + 1, size=n_loc)
    while caps.sum() < n:
        caps[rng.integers(n_loc)] += 1
    scores = rng.integers(0, score_denominator + 1, size=(n, n_loc))
    scores = scores.astype(float) / score_denominator
    prefixes = []
    for _ in range(n):
        depth = int(rng.integers(0, n_loc + 1))
        prefixes.append(tuple(int(l) for l in rng.permutation(n_loc)[:depth]))
    locations = tuple(f"L{j + 1}" for j in range(n_loc))
    return make_instance(locations, caps, scores, prefixes)


def run_random_property_suite(
    *,
    instances: int = 200,
    max_n: int = 4,
    max_locations: int = 4,
    seed: int = 0,
    eps_tol: float = TOTAL_SCORE_TOL,
    omit_held_in_probes: bool = False,
    invert_probe_verdicts: bool = False,
) -> List[CheckResult]:
    """Hammer random small instances and compare the optimized pipeline with
    the brute-force oracles on every property that must hold everywhere.

    One CheckResult per property, aggregated over all instances; the detail
    string of a failing property names the first offending instance seed
    index.  The corruption switches mirror verify_mechanism_example_suite.
    """
    from .lsap import PartialProblem, solve_max_assignment
    from .mechanism import MechanismParams, run_mechanism
    from .model import is_feasible

    rng = np.random.default_rng(seed)
    fails: Dict[str, str] = {}
    counts: Dict[str, int] = {}
    props = (
        "lsap_total_equals_brute",
        "lsap_lexicographic_tie_rule",
        "mechanism_feasible",
        "floor_respected",
        "probe_budget",
        "constrained_efficient",
        "incremental_matches_direct",
        "strategy_proof_small",
    )

    def note(prop: str, ok: bool, ctx: str) -> None:
        counts[prop] = counts.get(prop, 0) + 1
        if not ok and prop not in fails:
            fails[prop] = ctx

    for idx in range(instances):
        inst = random_small_instance(
            rng, max_n=max_n, max_locations=max_locations
        )
        brute_total, brute_locs = best_matching_brute(inst)
        solved = solve_max_assignment(
            PartialProblem(tuple(range(inst.n)), inst.capacities, inst.outcomes)
        )
        note(
            "lsap_total_equals_brute",
            solved.total == brute_total,
            f"instance {idx}: solver {solved.total!r} brute {brute_total!r}",
        )
        solved_locs = tuple(solved.assignment[i] for i in range(inst.n))
        note(
            "lsap_lexicographic_tie_rule",
            solved_locs == brute_locs,
            f"instance {idx}: solver {solved_locs} brute {brute_locs}",
        )

        g_bar = float(rng.uniform(0.0, 1.0)) * (brute_total / inst.n)
        order = tuple(int(a) for a in rng.permutation(inst.n))
        run_kwargs = dict(
            eps_tol=eps_tol,
            omit_held_in_probes=omit_held_in_probes,
            invert_probe_verdicts=invert_probe_verdicts,
        )
        out = run_mechanism(
            inst,
            MechanismParams(g_bar, order),
            record_trace=False,
            **run_kwargs,
        )
        note(
            "mechanism_feasible",
            is_feasible(inst, out.matching),
            f"instance {idx}: {out.matching.locs}",
        )
        note(
            "floor_respected",
            out.realized_total >= inst.n * g_bar - TOTAL_SCORE_TOL,
            f"instance {idx}: total {out.realized_total!r} floor {inst.n * g_bar!r}",
        )
        budget = inst.n * (inst.n_locations - 2) + 1
        note(
            "probe_budget",
            out.trace.probes_used <= budget,
            f"instance {idx}: used {out.trace.probes_used} budget {budget}",
        )
        note(
            "constrained_efficient",
            check_constrained_efficiency(inst, g_bar, out.matching),
            f"instance {idx}: {out.matching.locs} at floor {g_bar!r}",
        )
        direct = run_mechanism(
            inst,
            MechanismParams(g_bar, order),
            record_trace=False,
            probe_mode="direct",
            **run_kwargs,
        )
        note(
            "incremental_matches_direct",
            out.matching.locs == direct.matching.locs,
            f"instance {idx}: {out.matching.locs} vs {direct.matching.locs}",
        )
        if inst.n <= 3 and inst.n_locations <= 3:
            witness = find_manipulation(
                lambda i: run_mechanism(
                    i,
                    MechanismParams(g_bar, order),
                    record_trace=False,
                    **run_kwargs,
                ).matching,
                inst,
            )
            note(
                "strategy_proof_small",
                witness is None,
                f"instance {idx}: {witness}",
            )

    return [
        CheckResult(
            p,
            p not in fails,
            fails.get(p, f"{counts.get(p, 0)} cases"),
        )
        for p in props
        if counts.get(p, 0) > 0
    ]
