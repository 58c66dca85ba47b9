"""Instance bundles and result files on disk.

An instance bundle is a directory of three files:

- ``meta.json``: object with keys ``n``, ``locations`` (ordered identifier
  list), ``capacities`` (same order).
- ``outcomes.csv``: header row of location identifiers, then one row per
  agent with that agent's score at each location, 12 significant digits.
- ``preferences.csv``: header row ``rank1,rank2,...`` sized to the widest
  row, then one row per agent listing the identifiers of its strictly
  ranked locations, best first; rows may be ragged (shorter = deeper
  indifference tail).

Scores written here round-trip exactly: the generator quantizes scores to 12
significant digits at creation and ``%.12g`` preserves every such value, so
read(write(inst)) is bit-identical.  Agents appear in files and reports with
1-based labels; the in-memory API stays 0-based.

Result writers (matching, trace, sweep table, reorder table) all emit plain
comma-separated UTF-8 with a mandatory header row and ``.`` decimals.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .mechanism import MechanismTrace
from .model import Instance, Matching, make_instance
from .ordering import ReorderRow


class BundleError(ValueError):
    """Malformed bundle or result file; message carries file and line."""


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_instance(path: str, inst: Instance) -> None:
    """Write the three-file bundle, creating the directory if needed."""
    os.makedirs(path, exist_ok=True)
    meta = {
        "n": inst.n,
        "locations": list(inst.locations),
        "capacities": list(inst.capacities),
    }
    with open(os.path.join(path, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    with open(
        os.path.join(path, "outcomes.csv"), "w", encoding="utf-8", newline=""
    ) as fh:
        w = csv.writer(fh)
        w.writerow(inst.locations)
        for i in range(inst.n):
            w.writerow([_fmt(v) for v in inst.outcomes[i]])
    width = max((len(p.prefix) for p in inst.preferences), default=0)
    with open(
        os.path.join(path, "preferences.csv"), "w", encoding="utf-8", newline=""
    ) as fh:
        w = csv.writer(fh)
        w.writerow([f"rank{k + 1}" for k in range(width)])
        for p in inst.preferences:
            w.writerow([inst.locations[l] for l in p.prefix])


def read_instance(path: str) -> Instance:
    """Parse a bundle directory back into an Instance.

    Raises BundleError with file/line diagnostics on malformed input.
    """
    meta_path = os.path.join(path, "meta.json")
    try:
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise BundleError(f"{meta_path}: missing")
    except json.JSONDecodeError as e:
        raise BundleError(
            f"{meta_path}: line {e.lineno} column {e.colno}: {e.msg}"
        )
    for key in ("n", "locations", "capacities"):
        if key not in meta:
            raise BundleError(f"{meta_path}: missing key {key!r}")
    n = meta["n"]
    locations = [str(l) for l in meta["locations"]]
    capacities = meta["capacities"]
    if not isinstance(n, int) or n < 1:
        raise BundleError(f"{meta_path}: n must be a positive integer")
    if len(capacities) != len(locations):
        raise BundleError(
            f"{meta_path}: capacities and locations differ in length"
        )
    loc_index = {name: j for j, name in enumerate(locations)}
    if len(loc_index) != len(locations):
        raise BundleError(f"{meta_path}: duplicate location identifiers")

    out_path = os.path.join(path, "outcomes.csv")
    try:
        with open(out_path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise BundleError(f"{out_path}: missing")
    if not rows:
        raise BundleError(f"{out_path}: line 1: empty file")
    if rows[0] != locations:
        raise BundleError(
            f"{out_path}: line 1: header must equal the meta.json location list"
        )
    if len(rows) - 1 != n:
        raise BundleError(
            f"{out_path}: expected {n} score rows, found {len(rows) - 1}"
        )
    scores = np.empty((n, len(locations)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(locations):
            raise BundleError(
                f"{out_path}: line {i}: expected {len(locations)} columns, "
                f"found {len(row)}"
            )
        for j, cell in enumerate(row):
            try:
                scores[i - 2, j] = float(cell)
            except ValueError:
                raise BundleError(
                    f"{out_path}: line {i} column {j + 1}: "
                    f"not a number: {cell!r}"
                )

    pref_path = os.path.join(path, "preferences.csv")
    try:
        with open(pref_path, encoding="utf-8", newline="") as fh:
            prows = list(csv.reader(fh))
    except FileNotFoundError:
        raise BundleError(f"{pref_path}: missing")
    if not prows or not all(c.startswith("rank") for c in prows[0] if c):
        raise BundleError(f"{pref_path}: line 1: expected a rank header row")
    if len(prows) - 1 != n:
        raise BundleError(
            f"{pref_path}: expected {n} preference rows, found {len(prows) - 1}"
        )
    prefixes: List[tuple] = []
    for i, row in enumerate(prows[1:], start=2):
        ids = [c for c in row if c != ""]
        prefix = []
        for j, name in enumerate(ids):
            if name not in loc_index:
                raise BundleError(
                    f"{pref_path}: line {i} column {j + 1}: "
                    f"unknown location {name!r}"
                )
            prefix.append(loc_index[name])
        prefixes.append(tuple(prefix))

    if n > sum(capacities):
        raise BundleError(
            f"{meta_path}: instance infeasible: {n} agents exceed "
            f"total capacity {sum(capacities)}"
        )
    try:
        return make_instance(locations, capacities, scores, prefixes)
    except ValueError as e:
        raise BundleError(f"{path}: {e}")


def write_matching_csv(
    path: str, inst: Instance, matching: Matching
) -> None:
    """agent (1-based), location id, score, rank_of_assigned (1-based; an
    unlisted location gets prefix length + 1, the indifference tail)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent", "location", "score", "rank_of_assigned"])
        for i, loc in enumerate(matching.locs):
            pref = inst.preferences[i]
            w.writerow(
                [
                    i + 1,
                    inst.locations[loc],
                    _fmt(float(inst.outcomes[i, loc])),
                    pref.rank_of(loc) + 1,
                ]
            )


def read_matching_csv(path: str, inst: Instance) -> Matching:
    loc_index = {name: j for j, name in enumerate(inst.locations)}
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["agent", "location"]:
        raise BundleError(f"{path}: line 1: expected a matching header row")
    if len(rows) - 1 != inst.n:
        raise BundleError(
            f"{path}: expected {inst.n} rows, found {len(rows) - 1}"
        )
    locs = [0] * inst.n
    for i, row in enumerate(rows[1:], start=2):
        try:
            agent = int(row[0]) - 1
        except (ValueError, IndexError):
            raise BundleError(f"{path}: line {i}: bad agent label")
        if not 0 <= agent < inst.n:
            raise BundleError(f"{path}: line {i}: agent label out of range")
        if row[1] not in loc_index:
            raise BundleError(
                f"{path}: line {i}: unknown location {row[1]!r}"
            )
        locs[agent] = loc_index[row[1]]
    return Matching(tuple(locs))


def write_trace(path: str, inst: Instance, trace: MechanismTrace) -> None:
    """Trace file: header, one probe/action per line (agents 1-based,
    locations by identifier), then summary counter lines."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("kind,step,agent,location,value,verdict,near\n")
        for r in trace.records:
            loc = "" if r.location is None else inst.locations[r.location]
            val = "" if r.value is None else _fmt(r.value)
            near = "1" if r.near else "0"
            fh.write(
                f"{r.kind},{r.step},{r.agent + 1},{loc},{val},{r.verdict},{near}\n"
            )
        fh.write(f"# g_max,{_fmt(trace.g_max)}\n")
        fh.write(f"# probes_used,{trace.probes_used}\n")
        fh.write(f"# probe_evaluations,{trace.probe_evaluations}\n")
        fh.write(f"# holds_count,{trace.holds_count}\n")


def write_sweep_csv(path: str, rows: Iterable[dict]) -> None:
    """Floor-sweep table; one row per grid point."""
    cols = [
        "g_bar",
        "feasible",
        "top_k_proportion",
        "realized_mean",
        "probes_used",
        "holds_count",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow(
                [
                    _fmt(row["g_bar"]),
                    int(row["feasible"]),
                    "" if row["top_k_proportion"] is None else _fmt(row["top_k_proportion"]),
                    "" if row["realized_mean"] is None else _fmt(row["realized_mean"]),
                    "" if row["probes_used"] is None else row["probes_used"],
                    "" if row["holds_count"] is None else row["holds_count"],
                ]
            )


def write_reorder_csv(path: str, rows: Sequence[ReorderRow]) -> None:
    """Order-experiment table with the five standard columns."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["g_bar", "strategy", "order_id", "top3", "realized_mean"])
        for r in rows:
            w.writerow(
                [
                    _fmt(r.g_bar),
                    r.strategy,
                    "" if r.order_id is None else r.order_id,
                    "" if r.top_k is None else _fmt(r.top_k),
                    "" if r.realized_mean is None else _fmt(r.realized_mean),
                ]
            )
