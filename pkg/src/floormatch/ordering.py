"""Priority-order strategies and the order-randomization experiment.

The mechanism's outcome depends on the order agents are processed in, so the
order is a policy lever.  Strategies here: an explicit order, a seeded random
order, ordering by each agent's outcome-score variance across locations
(ascending or descending; low-variance agents early leaves high-variance
agents available to buffer the floor later), and selection by proxy: given a
predicted ("pseudo") preference profile, try many random orders under the
prediction and keep the one with the best predicted top-k metric.

The proxy selection never reads the true profile; it receives only the pseudo
profile and the score matrix.  Agents therefore cannot influence their
position in the chosen order through what they report, which is what keeps
the order lever incentive-compatible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .mechanism import MechanismParams, run_mechanism
from .model import AgentPreference, Instance, compute_metrics
from .simgen import replace_preferences


@dataclass(frozen=True)
class OrderingStrategy:
    """One of: given / random / increasing_variance / decreasing_variance /
    pseudo_inferred.  Use the constructors below rather than spelling out
    fields."""

    kind: str
    order: Optional[Tuple[int, ...]] = None
    seed: int = 0
    pseudo_profile: Optional[Tuple[AgentPreference, ...]] = None
    candidate_count: int = 100
    metric_k: int = 3

    @staticmethod
    def given(order: Sequence[int]) -> "OrderingStrategy":
        return OrderingStrategy("given", order=tuple(int(a) for a in order))

    @staticmethod
    def random(seed: int) -> "OrderingStrategy":
        return OrderingStrategy("random", seed=seed)

    @staticmethod
    def increasing_variance() -> "OrderingStrategy":
        return OrderingStrategy("increasing_variance")

    @staticmethod
    def decreasing_variance() -> "OrderingStrategy":
        return OrderingStrategy("decreasing_variance")

    @staticmethod
    def pseudo_inferred(
        pseudo_profile: Sequence[AgentPreference],
        candidate_count: int = 100,
        seed: int = 0,
        metric_k: int = 3,
    ) -> "OrderingStrategy":
        if candidate_count < 1:
            raise ValueError("candidate_count must be at least 1")
        return OrderingStrategy(
            "pseudo_inferred",
            pseudo_profile=tuple(pseudo_profile),
            candidate_count=candidate_count,
            seed=seed,
            metric_k=metric_k,
        )


def _variance_order(inst: Instance, descending: bool) -> Tuple[int, ...]:
    # population variance across all locations; ties fall back to agent index
    var = np.var(inst.outcomes, axis=1)
    key = -var if descending else var
    return tuple(int(a) for a in np.argsort(key, kind="stable"))


def make_order(
    inst: Instance, strat: OrderingStrategy, g_bar: float
) -> Tuple[int, ...]:
    """Produce a processing order (permutation of agent indices).

    g_bar matters only to pseudo_inferred, which scores candidate orders by
    actually running the mechanism at that floor under the pseudo profile.
    """
    n = inst.n
    if strat.kind == "given":
        if strat.order is None or sorted(strat.order) != list(range(n)):
            raise ValueError("given order must be a permutation of range(n)")
        return strat.order
    if strat.kind == "random":
        rng = np.random.default_rng(strat.seed)
        return tuple(int(a) for a in rng.permutation(n))
    if strat.kind == "increasing_variance":
        return _variance_order(inst, descending=False)
    if strat.kind == "decreasing_variance":
        return _variance_order(inst, descending=True)
    if strat.kind == "pseudo_inferred":
        if strat.pseudo_profile is None or len(strat.pseudo_profile) != n:
            raise ValueError("pseudo profile must cover every agent")
        # selection sees the pseudo profile only; true preferences stay out
        proxy = replace_preferences(inst, strat.pseudo_profile)
        rng = np.random.default_rng(strat.seed)
        best_order: Optional[Tuple[int, ...]] = None
        best_metric = -1.0
        for _ in range(strat.candidate_count):
            perm = tuple(int(a) for a in rng.permutation(n))
            out = run_mechanism(
                proxy, MechanismParams(g_bar, perm), record_trace=False
            )
            metric = compute_metrics(
                proxy, out.matching, ks=(strat.metric_k,)
            ).top_fraction[strat.metric_k]
            if metric > best_metric:
                best_metric, best_order = metric, perm
        assert best_order is not None
        return best_order
    raise ValueError(f"unknown ordering strategy {strat.kind!r}")


@dataclass(frozen=True)
class ReorderRow:
    g_bar: float
    strategy: str  # random | random_min | random_mean | random_max |
    #                increasing_variance | decreasing_variance | pseudo_inferred
    order_id: Optional[int]  # index into the random draws; None otherwise
    feasible: bool
    top_k: Optional[float]
    realized_mean: Optional[float]


def _map_ordered(fn, items, threads: int) -> list:
    # Results come back in input order either way; threads only change timing.
    if threads <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def reorder_experiment(
    inst: Instance,
    g_grid: Sequence[float],
    R: int,
    seed: int,
    *,
    metric_k: int = 3,
    pseudo_profile: Optional[Sequence[AgentPreference]] = None,
    candidate_count: int = 100,
    threads: int = 1,
) -> List[ReorderRow]:
    """Order-sensitivity table: R re-randomized orders per floor value, plus
    both variance orders and (optionally) the pseudo-selected order.

    Floor values beyond the instance's reachable maximum produce marker rows
    with no metrics instead of failing the experiment.  Each grid point draws
    its orders from its own seeded stream, so any single grid point can be
    recomputed independently of the rest.  ``threads`` sizes a worker pool
    over the candidate evaluations; the draws themselves stay sequential, so
    the table is identical at any thread count.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    from .mechanism import ThresholdInfeasible

    rows: List[ReorderRow] = []

    def metrics_for(order: Tuple[int, ...], g_bar: float):
        out = run_mechanism(inst, MechanismParams(g_bar, order), record_trace=False)
        rep = compute_metrics(inst, out.matching, ks=(metric_k,))
        return rep.top_fraction[metric_k], out.realized_mean

    for gi, g_bar in enumerate(g_grid):
        point: List[ReorderRow] = []
        rng = np.random.default_rng((seed, gi))
        try:
            perms = [
                tuple(int(a) for a in rng.permutation(inst.n)) for _ in range(R)
            ]
            evals = _map_ordered(lambda p: metrics_for(p, g_bar), perms, threads)
            tops: List[float] = []
            means: List[float] = []
            for r, (top, mean) in enumerate(evals):
                tops.append(top)
                means.append(mean)
                point.append(ReorderRow(g_bar, "random", r, True, top, mean))
            for name, val_t, val_m in (
                ("random_min", min(tops), min(means)),
                ("random_mean", float(np.mean(tops)), float(np.mean(means))),
                ("random_max", max(tops), max(means)),
            ):
                point.append(ReorderRow(g_bar, name, None, True, val_t, val_m))
            for kind in ("increasing_variance", "decreasing_variance"):
                order = make_order(inst, OrderingStrategy(kind), g_bar)
                top, mean = metrics_for(order, g_bar)
                point.append(ReorderRow(g_bar, kind, None, True, top, mean))
            if pseudo_profile is not None:
                pseudo_seed = int(
                    np.random.default_rng((seed, gi, 1)).integers(2**63)
                )
                strat = OrderingStrategy.pseudo_inferred(
                    pseudo_profile, candidate_count, pseudo_seed, metric_k
                )
                order = make_order(inst, strat, g_bar)
                top, mean = metrics_for(order, g_bar)
                point.append(ReorderRow(g_bar, "pseudo_inferred", None, True, top, mean))
        except ThresholdInfeasible:
            # floor not reachable: same verdict for every order, mark the point
            point = [
                ReorderRow(g_bar, strat, None, False, None, None)
                for strat in (
                    "random",
                    "random_min",
                    "random_mean",
                    "random_max",
                    "increasing_variance",
                    "decreasing_variance",
                )
                + (("pseudo_inferred",) if pseudo_profile is not None else ())
            ]
        rows.extend(point)
    return rows
