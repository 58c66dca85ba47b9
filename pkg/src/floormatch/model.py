"""Core data model: instances, preferences, matchings, and outcome metrics.

Conventions used throughout the package:

- Agents are dense 0-based indices.
- Locations carry string identifiers; internally everything works on their
  dense column index in the outcome matrix.
- Preferences are strict rankings over a subset of locations (the "prefix"),
  with all unlisted locations tied at the bottom.  A prefix covering all but
  exactly one location is indistinguishable from a full ranking, so it is
  normalized to one when a profile is built.
- Threshold comparisons happen on total score, never on the mean:
  a matching clears floor ``g_bar`` iff ``sum >= n * g_bar - TOTAL_SCORE_TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

# Absolute tolerance applied to total-score threshold comparisons.
TOTAL_SCORE_TOL = 1e-9


class ModelError(ValueError):
    """Invalid instance, preference, or matching data."""


def normalize_prefix(prefix: Sequence[int], n_locations: int) -> Tuple[int, ...]:
    """Validate a strict preference prefix and apply the all-but-one rule.

    A prefix listing exactly ``n_locations - 1`` locations leaves a single
    unlisted location, which is then fully determined; the prefix is extended
    to the complete strict ranking.  Entries must be distinct, in range.
    """
    seen = set()
    for loc in prefix:
        if not 0 <= loc < n_locations:
            raise ModelError(f"preference entry {loc} out of range")
        if loc in seen:
            raise ModelError(f"duplicate location {loc} in preference prefix")
        seen.add(loc)
    out = tuple(int(loc) for loc in prefix)
    if len(out) == n_locations - 1 and n_locations >= 1:
        missing = next(l for l in range(n_locations) if l not in seen)
        out = out + (missing,)
    return out


@dataclass(frozen=True)
class AgentPreference:
    """Strict ranking over ``prefix`` locations; everything else tied last."""

    prefix: Tuple[int, ...]

    def rank_of(self, loc: int) -> int:
        """Position of ``loc`` (0-based); unlisted locations share len(prefix)."""
        try:
            return self.prefix.index(loc)
        except ValueError:
            return len(self.prefix)

    def strictly_prefers(self, a: int, b: int) -> bool:
        return self.rank_of(a) < self.rank_of(b)

    def weakly_prefers(self, a: int, b: int) -> bool:
        return self.rank_of(a) <= self.rank_of(b)


@dataclass(frozen=True)
class Instance:
    """One matching problem: locations, capacities, outcome scores, preferences.

    outcomes has shape (n_agents, n_locations); outcomes[i, l] is the planner's
    score if agent i is assigned location l.  Scores must be finite and
    nonnegative but are otherwise on an arbitrary scale.
    """

    locations: Tuple[str, ...]
    capacities: Tuple[int, ...]
    outcomes: np.ndarray  # (n, L) float64, read-only
    preferences: Tuple[AgentPreference, ...]

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def location_index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.locations)}

    def total_capacity(self) -> int:
        return int(sum(self.capacities))


def make_instance(
    locations: Sequence[str],
    capacities: Sequence[int],
    outcomes: np.ndarray,
    prefixes: Iterable[Sequence[int]],
) -> Instance:
    """Build and validate an Instance; normalizes every preference prefix."""
    locations = tuple(str(x) for x in locations)
    if len(set(locations)) != len(locations):
        raise ModelError("location identifiers must be distinct")
    capacities = tuple(int(c) for c in capacities)
    if len(capacities) != len(locations):
        raise ModelError("one capacity per location required")
    if any(c < 1 for c in capacities):
        raise ModelError("capacities must be >= 1")
    outcomes = np.ascontiguousarray(outcomes, dtype=np.float64)
    if outcomes.ndim != 2 or outcomes.shape[1] != len(locations):
        raise ModelError("outcome matrix shape must be (n_agents, n_locations)")
    if not np.all(np.isfinite(outcomes)):
        raise ModelError("outcome scores must be finite")
    if np.any(outcomes < 0):
        raise ModelError("outcome scores must be nonnegative")
    n = outcomes.shape[0]
    if n > sum(capacities):
        raise ModelError(f"{n} agents exceed total capacity {sum(capacities)}")
    prefs = tuple(
        AgentPreference(normalize_prefix(p, len(locations))) for p in prefixes
    )
    if len(prefs) != n:
        raise ModelError("one preference per agent required")
    outcomes.setflags(write=False)
    return Instance(locations, capacities, outcomes, prefs)


@dataclass(frozen=True)
class Matching:
    """Total assignment: locs[i] is the location index of agent i."""

    locs: Tuple[int, ...]

    def as_dict(self, inst: Instance) -> Dict[int, str]:
        return {i: inst.locations[l] for i, l in enumerate(self.locs)}


def matching_from_ids(inst: Instance, by_agent: Sequence[str]) -> Matching:
    idx = inst.location_index
    return Matching(tuple(idx[name] for name in by_agent))


def realized_total(inst: Instance, m: Matching) -> float:
    # summed in agent order so equal assignments give bit-identical totals
    return float(np.sum(inst.outcomes[np.arange(inst.n), np.asarray(m.locs)]))


def is_feasible(inst: Instance, m: Matching) -> bool:
    """Every agent assigned a real location, no capacity exceeded."""
    locs = np.asarray(m.locs)
    if locs.shape != (inst.n,):
        return False
    if locs.size and (locs.min() < 0 or locs.max() >= inst.n_locations):
        return False
    counts = np.bincount(locs, minlength=inst.n_locations)
    return bool(np.all(counts <= np.asarray(inst.capacities)))


def is_g_acceptable(
    inst: Instance, m: Matching, g_bar: float, tol: float = TOTAL_SCORE_TOL
) -> bool:
    """Mean outcome score clears g_bar, compared on totals with tolerance."""
    return realized_total(inst, m) >= inst.n * g_bar - tol


@dataclass(frozen=True)
class MetricReport:
    """Assignment quality summary for one matching."""

    top_fraction: Dict[int, float]  # k -> share of agents placed in their top k
    realized_mean: float
    realized_total: float


def compute_metrics(
    inst: Instance, m: Matching, ks: Sequence[int] = (1, 3, 5)
) -> MetricReport:
    """Top-k placement shares and the realized mean outcome score.

    An agent counts toward top-k only if its assigned location sits among the
    first min(k, |prefix|) strictly ranked entries; an agent ranking nothing
    strictly never counts.  Denominator is always n.
    """
    if inst.n == 0:
        raise ModelError("metrics undefined for empty instance")
    top = {}
    for k in ks:
        if k < 1:
            raise ModelError(f"top-k needs k >= 1, got {k}")
        hits = 0
        for i, pref in enumerate(inst.preferences):
            depth = min(k, len(pref.prefix))
            if m.locs[i] in pref.prefix[:depth]:
                hits += 1
        top[int(k)] = hits / inst.n
    total = realized_total(inst, m)
    return MetricReport(top_fraction=top, realized_mean=total / inst.n, realized_total=total)


def pareto_dominates(inst: Instance, a: Matching, b: Matching) -> bool:
    """True iff every agent weakly prefers its spot in ``a`` and one strictly does.

    Comparison is purely preference-based: listed beats unlisted, earlier
    prefix position beats later, unlisted locations are mutually indifferent.
    """
    strict = False
    for i, pref in enumerate(inst.preferences):
        ra, rb = pref.rank_of(a.locs[i]), pref.rank_of(b.locs[i])
        if ra > rb:
            return False
        if ra < rb:
            strict = True
    return strict
