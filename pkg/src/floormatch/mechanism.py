"""Sequential priority assignment under a minimum-average-outcome floor.

Agents are processed in a priority order.  Each agent receives its most
preferred strictly ranked location among those that still have capacity and
whose selection provably leaves the remaining agents a completion keeping the
average outcome score at or above the floor; when no strictly ranked location
qualifies, the agent is put on hold.  After the last step, agents on hold are
placed all at once by an outcome-maximizing assignment over the remaining
capacity.  A floor above the best achievable average is rejected up front.

All floor comparisons happen on totals with an absolute tolerance: a
completion with total T passes floor g iff T >= n*g - eps_tol.

The trace records every probe (location considered, completion value,
verdict) plus hold/assign/final actions, in deterministic order; two runs on
identical inputs produce identical traces.  ``probes_used`` counts the
assignment-solver invocations made after the feasibility gate (incremental
probe evaluation answers most probes without any solver call, so this stays
far below the count a probe-per-solve implementation would need).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .engine import PoolEngine
from .lsap import PartialProblem, base_solve, solve_max_assignment
from .model import TOTAL_SCORE_TOL, Instance, Matching

# Probes whose total sits within this many tolerances of the floor get a
# near-threshold flag in the trace; such verdicts are float-sensitive.
NEAR_THRESHOLD_FACTOR = 10.0


class ThresholdInfeasible(ValueError):
    """The requested floor exceeds the best achievable average score."""

    def __init__(self, g_bar: float, g_max: float):
        super().__init__(
            f"floor {g_bar!r} exceeds the maximum achievable average {g_max!r}"
        )
        self.g_bar = g_bar
        self.g_max = g_max


class InstanceInvalid(ValueError):
    """Order is not a permutation, or parameters are malformed."""


@dataclass(frozen=True)
class MechanismParams:
    """Floor value and the priority order (agent indices, highest first)."""

    g_bar: float
    order: Optional[Tuple[int, ...]] = None


@dataclass(frozen=True)
class TraceRecord:
    kind: str  # "probe" | "assign" | "hold" | "final"
    step: int  # 1-based; final records use n + 1
    agent: int
    location: Optional[int]
    value: Optional[float]  # completion mean for probes, else None
    verdict: str  # "pass" | "fail" | ""
    near: bool = False


@dataclass(frozen=True)
class MechanismTrace:
    """Everything needed to replay or audit one mechanism run.

    probes_used: assignment-solver calls after the feasibility gate (probe
    fallbacks plus the one terminal solve when agents were on hold).
    probe_evaluations: locations actually evaluated against the floor.
    """

    records: Tuple[TraceRecord, ...]
    g_max: float
    probes_used: int
    probe_evaluations: int
    holds_count: int
    near_threshold_count: int

    def to_lines(self) -> List[str]:
        """Stable line-oriented serialization (one probe/action per line)."""
        out = []
        for r in self.records:
            loc = "" if r.location is None else str(r.location)
            val = "" if r.value is None else f"{r.value:.12g}"
            near = "1" if r.near else "0"
            out.append(
                f"{r.kind},{r.step},{r.agent},{loc},{val},{r.verdict},{near}"
            )
        return out


@dataclass(frozen=True)
class MechanismOutcome:
    matching: Matching
    trace: MechanismTrace
    realized_total: float
    realized_mean: float
    held_agents: Tuple[int, ...]


class _DirectPool:
    """Reference pool: every probe is a from-scratch solve.  Test double for
    PoolEngine; also hosts the omit-held corruption switch used by the
    self-test suite, which deliberately breaks probe values."""

    def __init__(self, scores, agents, capacities, omit: Optional[Set[int]] = None):
        self.scores = scores
        self.caps = np.asarray(capacities, dtype=np.intp).copy()
        self.pool = np.array(sorted(agents), dtype=np.intp)
        self.omit = omit if omit is not None else set()
        self.scratch_solves = 0
        self._total, self.locs = base_solve(scores, self.pool, self.caps)
        self.scratch_solves += 1

    @property
    def total(self):
        return self._total

    def best_total_with(self, agent: int, loc: int) -> float:
        rest = [a for a in self.pool if a != agent and a not in self.omit]
        trial = self.caps.copy()
        trial[loc] -= 1
        sub_total, _ = base_solve(self.scores, rest, trial)
        self.scratch_solves += 1
        return float(self.scores[agent, loc]) + sub_total

    def commit(self, agent: int, loc: int) -> None:
        self.pool = self.pool[self.pool != agent]
        self.caps[loc] -= 1
        self._total, self.locs = base_solve(self.scores, self.pool, self.caps)
        self.scratch_solves += 1


def run_mechanism(
    inst: Instance,
    params: MechanismParams,
    *,
    record_trace: bool = True,
    probe_mode: str = "incremental",
    eps_tol: float = TOTAL_SCORE_TOL,
    omit_held_in_probes: bool = False,
    invert_probe_verdicts: bool = False,
) -> MechanismOutcome:
    """Run the floor-constrained priority mechanism.

    Args:
        inst: the matching problem.
        params: floor and priority order (default order: agent index).
        record_trace: keep per-probe records (counters are always kept).
        probe_mode: "incremental" (default) or "direct" (reference
            implementation, one solve per probe; used for cross-checking).
        eps_tol: absolute tolerance on total-score floor comparisons.
            Exposed for the self-test suite; leave at default otherwise.
        omit_held_in_probes: corruption switch for the self-test suite;
            silently ignores held agents when valuing completions.  Forces
            direct mode.  Never enable outside sanity checks.
        invert_probe_verdicts: corruption switch for the self-test suite;
            flips the sign of every probe comparison, as a sign bug in the
            floor test would.  Never enable outside sanity checks.

    Raises:
        ThresholdInfeasible: floor above the best achievable average.
        InstanceInvalid: order is not a permutation of the agents.
    """
    n = inst.n
    order = params.order if params.order is not None else tuple(range(n))
    if sorted(order) != list(range(n)):
        raise InstanceInvalid("order must be a permutation of range(n)")
    if probe_mode not in ("incremental", "direct"):
        raise InstanceInvalid(f"unknown probe_mode {probe_mode!r}")
    if omit_held_in_probes:
        probe_mode = "direct"

    scores = inst.outcomes
    g_bar = float(params.g_bar)
    floor_total = n * g_bar - eps_tol
    held: Set[int] = set()

    if probe_mode == "incremental":
        pool = PoolEngine(scores, range(n), inst.capacities)
    else:
        pool = _DirectPool(
            scores, range(n), inst.capacities, omit=held if omit_held_in_probes else None
        )
    g_max = pool.total / n
    if n * g_bar > pool.total + eps_tol:
        raise ThresholdInfeasible(g_bar, g_max)
    init_solves = pool.scratch_solves

    records: List[TraceRecord] = []
    assigned: Dict[int, int] = {}
    assigned_total = 0.0
    probe_evaluations = 0
    near_count = 0

    for step, agent in enumerate(order, start=1):
        pref = inst.preferences[agent]
        target = None
        for loc in pref.prefix:
            if pool.caps[loc] <= 0:
                continue
            completion = assigned_total + pool.best_total_with(agent, loc)
            probe_evaluations += 1
            ok = completion >= floor_total
            if invert_probe_verdicts:
                ok = not ok
            near = abs(completion - n * g_bar) <= NEAR_THRESHOLD_FACTOR * eps_tol
            near_count += near
            if record_trace:
                records.append(
                    TraceRecord(
                        "probe", step, agent, loc, completion / n,
                        "pass" if ok else "fail", near,
                    )
                )
            if ok:
                target = loc
                break
        if target is None:
            held.add(agent)
            if record_trace:
                records.append(TraceRecord("hold", step, agent, None, None, ""))
        else:
            pool.commit(agent, target)
            assigned[agent] = target
            assigned_total += float(scores[agent, target])
            if record_trace:
                records.append(TraceRecord("assign", step, agent, target, None, ""))

    probes_used = pool.scratch_solves - init_solves
    if held:
        final = solve_max_assignment(
            PartialProblem(tuple(sorted(held)), tuple(int(c) for c in pool.caps), scores)
        )
        probes_used += 1
        for agent in sorted(held):
            assigned[agent] = final.assignment[agent]
            if record_trace:
                records.append(
                    TraceRecord("final", n + 1, agent, final.assignment[agent], None, "")
                )

    matching = Matching(tuple(assigned[i] for i in range(n)))
    total = float(np.sum(scores[np.arange(n), np.asarray(matching.locs)]))
    trace = MechanismTrace(
        records=tuple(records),
        g_max=g_max,
        probes_used=probes_used,
        probe_evaluations=probe_evaluations,
        holds_count=len(held),
        near_threshold_count=near_count,
    )
    return MechanismOutcome(
        matching=matching,
        trace=trace,
        realized_total=total,
        realized_mean=total / n,
        held_agents=tuple(sorted(held)),
    )


def feasible_locations(
    inst: Instance,
    g_bar: float,
    agent: int,
    assigned: Mapping[int, int],
    *,
    eps_tol: float = TOTAL_SCORE_TOL,
) -> Tuple[int, ...]:
    """Locations open to ``agent`` at an intermediate mechanism state.

    ``assigned`` maps already-placed agents to their locations; every other
    agent (held or not yet reached) still counts toward the completion.  A
    location qualifies if it has residual capacity and pinning the agent there
    leaves the rest a completion whose total clears the floor.  All locations
    are evaluated, strictly ranked or not; the run loop itself only ever
    probes the strict prefix.

    Standalone analysis helper built on from-scratch solves; not used by
    run_mechanism, so it doubles as an independent check of the fast path.
    """
    if agent in assigned:
        raise InstanceInvalid(f"agent {agent} is already assigned")
    if not 0 <= agent < inst.n:
        raise InstanceInvalid(f"agent {agent} out of range")
    caps = np.array(inst.capacities, dtype=np.intp)
    fixed_total = 0.0
    for a, l in assigned.items():
        if not 0 <= a < inst.n:
            raise InstanceInvalid(f"assigned agent {a} out of range")
        if not 0 <= l < inst.n_locations:
            raise InstanceInvalid(f"assigned location {l} out of range")
        caps[l] -= 1
        fixed_total += float(inst.outcomes[a, l])
    if caps.min() < 0:
        raise InstanceInvalid("assigned agents exceed a capacity")
    rest = [a for a in range(inst.n) if a not in assigned and a != agent]
    out = []
    for loc in range(inst.n_locations):
        if caps[loc] <= 0:
            continue
        trial = caps.copy()
        trial[loc] -= 1
        sub_total, _ = base_solve(inst.outcomes, rest, trial)
        completion = fixed_total + float(inst.outcomes[agent, loc]) + sub_total
        if completion >= inst.n * g_bar - eps_tol:
            out.append(loc)
    return tuple(out)
