"""Incremental what-if evaluation over a shrinking assignment pool.

The sequential mechanism repeatedly asks: if agent ``a`` were pinned to
location ``l``, what is the best total the remaining pool could still reach?
Answering each probe with a fresh LSAP solve is correct but wasteful.  This
engine keeps one optimal assignment ("incumbent") of the current pool and
answers all probes of a step from residual-graph sensitivities:

- Removing ``a`` from its incumbent spot leaves an optimal assignment of the
  remaining pool with one slot freed at that spot.
- Pinning ``a`` to ``l`` instead shifts one capacity unit from ``l`` to the
  freed spot.  The exact reoptimization cost is the cheaper of two residual
  options: one chain of agent moves from ``l`` to the freed spot, or (when
  ``l`` must shed a unit into ordinary slack) a chain to slack plus the best
  independent improving chain into the freed spot.  A crossover argument
  shows chains sharing nodes never beat these candidates, so the value is
  exact, not a bound.

Chain costs come from vectorized Bellman-Ford sweeps (`lsap.chain_distances`).
Committing an assignment replays the minimizing chains on the incumbent; any
inconsistency (float-noise cycling, replay drift) falls back to a from-scratch
re-solve, so correctness never depends on the incremental path.  Setting the
environment variable FLOORMATCH_PARANOID=1 re-sums the incumbent after every
commit and fails loudly on drift; the test suite uses it.
"""

from __future__ import annotations

import os
from typing import Dict, Optional, Sequence, Set, Tuple

import numpy as np

from .lsap import arc_matrix, base_solve, chain_distances

# Replayed chains must reproduce the probe's predicted cost this closely,
# else the incumbent is discarded and re-solved from scratch.
_REPLAY_TOL = 1e-6

_PARANOID = os.environ.get("FLOORMATCH_PARANOID", "") not in ("", "0")


class _ReplayMismatch(Exception):
    """Internal: incremental replay failed; caller re-solves from scratch."""


class PoolEngine:
    """Optimal-assignment state over the agents not yet placed."""

    def __init__(
        self,
        scores: np.ndarray,
        agents: Sequence[int],
        capacities: Sequence[int],
    ):
        self.scores = scores
        self.n_loc = scores.shape[1]
        self.caps = np.asarray(capacities, dtype=np.intp).copy()
        self.pool = np.array(sorted(agents), dtype=np.intp)
        self.scratch_solves = 0
        self._resolve()

    # -- views -------------------------------------------------------------

    @property
    def total(self) -> float:
        """Best total the pool can reach under current capacities."""
        return self._total

    def incumbent_loc(self, agent: int) -> int:
        return int(self.locs[self._pos(agent)])

    def pool_assignment(self) -> Dict[int, int]:
        return {int(a): int(l) for a, l in zip(self.pool, self.locs)}

    # -- probes ------------------------------------------------------------

    def best_total_with(self, agent: int, loc: int) -> float:
        """g[agent, loc] plus the others' best total once loc loses a slot.

        Precondition: agent in pool, caps[loc] >= 1.  Does not mutate state.
        """
        beta = self.incumbent_loc(agent)
        g_al = float(self.scores[agent, loc])
        if loc == beta:
            return g_al + (self._total - float(self.scores[agent, beta]))
        if self.pool.size == 1:
            return g_al
        ctx = self._context(agent)
        return g_al + ctx["base"] - self._shift_cost(ctx, loc)[1]

    # -- state changes -------------------------------------------------------

    def commit(self, agent: int, loc: int) -> None:
        """Permanently assign agent to loc; pool shrinks, caps[loc] drops."""
        i = self._pos(agent)
        beta = int(self.locs[i])
        trivial = loc == beta or self.pool.size == 1
        ctx = None if trivial else self._context(agent)
        branch = None if trivial else self._shift_cost(ctx, loc)
        self.pool = np.delete(self.pool, i)
        self.locs = np.delete(self.locs, i)
        self.caps[loc] -= 1
        self._positions = None
        self._ctx = None
        if self.pool.size == 0:
            self._total = 0.0
        elif trivial:
            self._total = float(self._total - self.scores[agent, beta])
        else:
            try:
                applied = self._replay(ctx, loc, branch[0])
                if abs(applied - branch[1]) > _REPLAY_TOL:
                    raise _ReplayMismatch
                self._total = ctx["base"] - applied
            except _ReplayMismatch:
                self._resolve()
        if _PARANOID and self.pool.size:
            exact = float(np.sum(self.scores[self.pool, self.locs]))
            if abs(exact - self._total) > 1e-9:
                raise AssertionError(
                    f"incumbent drift: tracked {self._total!r} vs actual {exact!r}"
                )

    # -- internals -----------------------------------------------------------

    def _resolve(self) -> None:
        self._total, self.locs = base_solve(self.scores, self.pool, self.caps)
        self.scratch_solves += 1
        self._positions: Optional[Dict[int, int]] = None
        self._ctx: Optional[dict] = None

    def _pos(self, agent: int) -> int:
        if self._positions is None:
            self._positions = {int(a): i for i, a in enumerate(self.pool)}
        return self._positions[agent]

    def _context(self, agent: int) -> dict:
        """Residual-chain arrays for the pool minus ``agent`` (cached)."""
        if self._ctx is not None and self._ctx["agent"] == agent:
            return self._ctx
        i = self._pos(agent)
        beta = int(self.locs[i])
        rest = np.delete(self.pool, i)
        rest_locs = np.delete(self.locs, i)
        flow = np.bincount(rest_locs, minlength=self.n_loc)
        arc = arc_matrix(self.scores, rest, rest_locs, self.n_loc)
        beta_mask = np.zeros(self.n_loc, dtype=bool)
        beta_mask[beta] = True
        d_beta = chain_distances(arc, beta_mask)
        room = flow < self.caps
        room[beta] = False  # the freed spot is reached via d_beta instead
        d_room = (
            chain_distances(arc, room) if room.any() else np.full(self.n_loc, np.inf)
        )
        self._ctx = {
            "agent": agent,
            "beta": beta,
            "base": self._total - float(self.scores[agent, beta]),
            "flow": flow,
            "room": room,
            "arc": arc,
            "d_beta": d_beta,
            "d_room": d_room,
            "best_improve": min(0.0, float(d_beta.min())),
        }
        return self._ctx

    def _shift_cost(self, ctx: dict, loc: int) -> Tuple[str, float]:
        """(branch, exact drop in the others' best total) for pinning at loc."""
        if ctx["flow"][loc] < self.caps[loc]:
            return "roomy", ctx["best_improve"]
        direct = float(ctx["d_beta"][loc])
        via_room = float(ctx["d_room"][loc]) + ctx["best_improve"]
        if direct <= via_room:
            return "direct", direct
        return "via_room", via_room

    def _replay(self, ctx: dict, loc: int, branch: str) -> float:
        """Apply the minimizing chain(s); returns the cost actually applied.

        Precondition: agent already dropped from pool/locs and caps[loc]
        already decremented; ctx describes exactly this pool.
        """
        beta = ctx["beta"]
        if branch == "direct":
            return self._apply_chain(ctx["arc"], ctx["d_beta"], loc, {beta})
        if branch == "via_room":
            targets = set(int(v) for v in np.flatnonzero(ctx["room"]))
            cost = self._apply_chain(ctx["arc"], ctx["d_room"], loc, targets)
            # flow changed: rebuild residual arcs before improving into beta
            arc2 = arc_matrix(self.scores, self.pool, self.locs, self.n_loc)
            beta_mask = np.zeros(self.n_loc, dtype=bool)
            beta_mask[beta] = True
            d2 = chain_distances(arc2, beta_mask)
            if float(d2.min()) < -1e-12:
                cost += self._apply_chain(arc2, d2, int(np.argmin(d2)), {beta})
            return cost
        # roomy: the slot vacated at loc was unused; only the improvement runs
        if ctx["best_improve"] < -1e-12:
            start = int(np.argmin(ctx["d_beta"]))
            return self._apply_chain(ctx["arc"], ctx["d_beta"], start, {beta})
        return 0.0

    def _apply_chain(
        self, arc: np.ndarray, dist: np.ndarray, start: int, targets: Set[int]
    ) -> float:
        """Move agents along the shortest chain from start into targets."""
        applied = 0.0
        u = start
        visited: Set[int] = set()
        moved: Set[int] = set()
        while u not in targets:
            if u in visited:
                raise _ReplayMismatch
            visited.add(u)
            v = int(np.argmin(arc[u] + dist))
            here = np.flatnonzero(self.locs == u)
            here = here[[int(self.pool[j]) not in moved for j in here]]
            if here.size == 0:
                raise _ReplayMismatch
            deltas = self.scores[self.pool[here], u] - self.scores[self.pool[here], v]
            pick = here[int(np.argmin(deltas))]
            moved.add(int(self.pool[pick]))
            applied += float(deltas.min())
            self.locs[pick] = v
            u = v
        return applied
