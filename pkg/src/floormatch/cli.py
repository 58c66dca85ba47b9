"""Command-line surface: generate, inspect, assign, sweep, verify, reorder.

Commands
  gen      write a simulated instance bundle from a config
  gmax     print the maximum achievable average outcome of a bundle
  assign   run the floor-constrained mechanism once, write matching + trace
  sweep    run the mechanism across a grid of floor values, write a CSV table
  verify   run the oracle batteries (worked examples + randomized properties)
  reorder  run the priority-order experiment, write a CSV table

Exit codes: 0 success, 2 floor above the achievable maximum, 3 parse or
configuration error, 4 oracle suite failure.

Every flag can also be given in a config file (``--config FILE``) holding
flat ``key = value`` lines; ``#`` starts a comment line.  Keys are the long
flag names with dashes or underscores.  A flag given on the command line
overrides the config file.  Agents are labeled 1..n in files, output, and
order specs; library code indexes them 0..n-1.

Order specs: ``natural`` (label order), an explicit permutation such as
``3,1,2``, ``random`` or ``random:seed=7``, ``increasing_variance``,
``decreasing_variance``.

Floor grids default to 51 points from 0 to the instance maximum (step =
max/50); override with an explicit ``--g-grid`` list or start/stop/step.

``--threads`` sizes the worker pool for sweep grid points and reorder
candidates (default: the FLOORMATCH_THREADS environment variable, else the
machine's available parallelism).  Output order never depends on it.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from . import bundle
from .lsap import solve_max_matching_value
from .mechanism import (
    InstanceInvalid,
    MechanismParams,
    ThresholdInfeasible,
    run_mechanism,
)
from .model import Instance, ModelError, compute_metrics
from .oracles import run_random_property_suite, verify_mechanism_example_suite
from .ordering import OrderingStrategy, _map_ordered, make_order, reorder_experiment
from .simgen import InvalidConfig, SimConfig, generate_instance

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_PARSE = 3
EXIT_ORACLE = 4

THREADS_ENV_VAR = "FLOORMATCH_THREADS"

T = TypeVar("T")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; 2 is taken, parse errors are 3.
    def error(self, message: str):
        raise CliError(EXIT_PARSE, message)


# -- config files ----------------------------------------------------------------


def _load_config(path: Optional[str]) -> Dict[str, str]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise CliError(EXIT_PARSE, f"cannot read config {path}: {e}")
    out: Dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise CliError(
                EXIT_PARSE,
                f"{path}: line {lineno}: expected 'key = value'",
            )
        key, _, value = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if not key:
            raise CliError(EXIT_PARSE, f"{path}: line {lineno}: empty key")
        if key in out:
            raise CliError(EXIT_PARSE, f"{path}: line {lineno}: duplicate key {key}")
        out[key] = value.strip()
    return out


def _config_keys(parser: argparse.ArgumentParser) -> set:
    keys = set()
    for action in parser._actions:
        if not action.option_strings:
            continue  # positionals have no config equivalent
        if action.dest in ("help", "config"):
            continue
        keys.add(action.dest)
    return keys


def _check_config(cfg: Dict[str, str], parser: argparse.ArgumentParser, path: Optional[str]) -> None:
    allowed = _config_keys(parser)
    for key in cfg:
        if key not in allowed:
            raise CliError(EXIT_PARSE, f"{path}: unknown config key {key!r}")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _resolve(
    args: argparse.Namespace,
    cfg: Dict[str, str],
    key: str,
    conv: Callable[[str], T],
    default: Optional[T] = None,
    required: bool = False,
) -> Optional[T]:
    """Command line beats config beats default."""
    value = getattr(args, key)
    if value is None and key in cfg:
        try:
            value = conv(cfg[key])
        except ValueError as e:
            raise CliError(EXIT_PARSE, f"config key {key}: {e}")
    if value is None:
        value = default
    if value is None and required:
        raise CliError(EXIT_PARSE, f"missing required option --{key.replace('_', '-')}")
    return value


def _resolve_threads(args: argparse.Namespace, cfg: Dict[str, str]) -> int:
    threads = _resolve(args, cfg, "threads", int)
    if threads is None:
        env = os.environ.get(THREADS_ENV_VAR)
        if env is not None:
            try:
                threads = int(env)
            except ValueError:
                raise CliError(
                    EXIT_PARSE, f"{THREADS_ENV_VAR} must be an integer, got {env!r}"
                )
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise CliError(EXIT_PARSE, "thread count must be at least 1")
    return threads


# -- shared argument plumbing ----------------------------------------------------


def _read_bundle(path: str) -> Instance:
    try:
        return bundle.read_instance(path)
    except bundle.BundleError as e:
        raise CliError(EXIT_PARSE, str(e))


def _parse_order_spec(spec: str, n: int) -> OrderingStrategy:
    spec = spec.strip()
    if spec == "natural":
        return OrderingStrategy.given(tuple(range(n)))
    if spec == "random":
        return OrderingStrategy.random(0)
    if spec.startswith("random:"):
        rest = spec[len("random:"):]
        if not rest.startswith("seed="):
            raise CliError(
                EXIT_PARSE, f"bad order spec {spec!r}; expected random:seed=<int>"
            )
        try:
            return OrderingStrategy.random(int(rest[len("seed="):]))
        except ValueError:
            raise CliError(EXIT_PARSE, f"bad seed in order spec {spec!r}")
    if spec in ("increasing_variance", "decreasing_variance"):
        return OrderingStrategy(spec)
    try:
        labels = [int(tok) for tok in spec.split(",")]
    except ValueError:
        raise CliError(EXIT_PARSE, f"unknown order spec {spec!r}")
    if sorted(labels) != list(range(1, n + 1)):
        raise CliError(
            EXIT_PARSE,
            f"order {spec!r} is not a permutation of the agent labels 1..{n}",
        )
    return OrderingStrategy.given(tuple(label - 1 for label in labels))


def _parse_float_list(raw: str) -> List[float]:
    try:
        values = [float(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError:
        raise CliError(EXIT_PARSE, f"bad number list {raw!r}")
    if not values:
        raise CliError(EXIT_PARSE, "empty grid")
    return values


def _build_grid(
    explicit: Optional[str],
    start: Optional[float],
    stop: Optional[float],
    step: Optional[float],
    g_max: float,
) -> List[float]:
    if explicit is not None:
        values = _parse_float_list(explicit)
        if any(b < a for a, b in zip(values, values[1:])):
            raise CliError(EXIT_PARSE, "grid values must be sorted ascending")
        return values
    lo = 0.0 if start is None else start
    hi = g_max if stop is None else stop
    if hi < lo:
        raise CliError(EXIT_PARSE, f"grid stop {hi} below start {lo}")
    if step is None:
        step = (hi - lo) / 50.0
    if step <= 0:
        return [lo]
    count = int(round((hi - lo) / step)) + 1
    values = [lo + i * step for i in range(count)]
    # keep the grid inside [lo, hi] against accumulated float error
    return [v for v in values if v <= hi + 1e-12] or [lo]


# -- commands --------------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_config(cfg, args.parser, args.config)
    out = _resolve(args, cfg, "out", str, required=True)
    n = _resolve(args, cfg, "n", int, required=True)
    sim = SimConfig(
        n=n,
        rho_p=_resolve(args, cfg, "rho_p", float, 0.0),
        rho_op=_resolve(args, cfg, "rho_op", float, 0.0),
        truncation_k=_resolve(args, cfg, "truncation_k", int),
        seed=_resolve(args, cfg, "seed", int, 0),
    )
    inst = generate_instance(sim)
    bundle.write_instance(out, inst)
    g_max = solve_max_matching_value(inst.outcomes, inst.capacities)
    print(
        f"wrote {out}: agents={inst.n} locations={inst.n_locations} "
        f"g_max={g_max:.12g}"
    )
    return EXIT_OK


def cmd_gmax(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_config(cfg, args.parser, args.config)
    inst = _read_bundle(args.instance)
    print(f"{solve_max_matching_value(inst.outcomes, inst.capacities):.12g}")
    return EXIT_OK


def cmd_assign(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_config(cfg, args.parser, args.config)
    inst = _read_bundle(args.instance)
    g_bar = _resolve(args, cfg, "g_bar", float, required=True)
    clamp = _resolve(args, cfg, "clamp_to_gmax", _parse_bool, False)
    order_spec = _resolve(args, cfg, "order", str, "natural")
    matching_out = _resolve(args, cfg, "matching_out", str, "matching.csv")
    trace_out = _resolve(args, cfg, "trace_out", str, "trace.csv")
    if clamp:
        g_bar = min(g_bar, solve_max_matching_value(inst.outcomes, inst.capacities))
    strategy = _parse_order_spec(order_spec, inst.n)
    order = make_order(inst, strategy, g_bar)
    outcome = run_mechanism(inst, MechanismParams(g_bar=g_bar, order=order))
    bundle.write_matching_csv(matching_out, inst, outcome.matching)
    bundle.write_trace(trace_out, inst, outcome.trace)
    print(
        f"wrote {matching_out} and {trace_out}: "
        f"realized_mean={outcome.realized_mean:.12g} "
        f"held={outcome.trace.holds_count} "
        f"probes_used={outcome.trace.probes_used}"
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_config(cfg, args.parser, args.config)
    inst = _read_bundle(args.instance)
    out = _resolve(args, cfg, "out", str, "sweep.csv")
    metric_k = _resolve(args, cfg, "metric_k", int, 3)
    order_spec = _resolve(args, cfg, "order", str, "natural")
    threads = _resolve_threads(args, cfg)
    g_max = solve_max_matching_value(inst.outcomes, inst.capacities)
    grid = _build_grid(
        _resolve(args, cfg, "g_grid", str),
        _resolve(args, cfg, "grid_start", float),
        _resolve(args, cfg, "grid_stop", float),
        _resolve(args, cfg, "grid_step", float),
        g_max,
    )
    strategy = _parse_order_spec(order_spec, inst.n)
    order = make_order(inst, strategy, grid[0])

    def row_for(g_bar: float) -> dict:
        try:
            outcome = run_mechanism(
                inst, MechanismParams(g_bar=g_bar, order=order), record_trace=False
            )
        except ThresholdInfeasible:
            return {
                "g_bar": g_bar,
                "feasible": False,
                "top_k_proportion": None,
                "realized_mean": None,
                "probes_used": None,
                "holds_count": None,
            }
        report = compute_metrics(inst, outcome.matching, ks=(metric_k,))
        return {
            "g_bar": g_bar,
            "feasible": True,
            "top_k_proportion": report.top_fraction[metric_k],
            "realized_mean": outcome.realized_mean,
            "probes_used": outcome.trace.probes_used,
            "holds_count": outcome.trace.holds_count,
        }

    rows = _map_ordered(row_for, grid, threads)
    bundle.write_sweep_csv(out, rows)
    feasible = sum(1 for r in rows if r["feasible"])
    print(f"wrote {out}: {len(rows)} rows, {feasible} feasible")
    return EXIT_OK


_SELF_TESTS = {
    "sign-flip": {"invert_probe_verdicts": True},
    "omit-held": {"omit_held_in_probes": True},
    "fat-eps": {"eps_tol": 0.35},
}


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_config(cfg, args.parser, args.config)
    instances = _resolve(args, cfg, "instances", int, 200)
    max_n = _resolve(args, cfg, "max_n", int, 4)
    max_locations = _resolve(args, cfg, "max_locations", int, 4)
    seed = _resolve(args, cfg, "seed", int, 0)
    self_test = _resolve(args, cfg, "self_test", str)
    corrupt = {}
    if self_test is not None:
        if self_test not in _SELF_TESTS:
            raise CliError(
                EXIT_PARSE,
                f"unknown self test {self_test!r}; "
                f"choose from {', '.join(sorted(_SELF_TESTS))}",
            )
        corrupt = _SELF_TESTS[self_test]
        print(f"self test: running with deliberate corruption {self_test}")
    checks = verify_mechanism_example_suite(**corrupt)
    checks += run_random_property_suite(
        instances=instances,
        max_n=max_n,
        max_locations=max_locations,
        seed=seed,
        **corrupt,
    )
    failed = 0
    for check in checks:
        if check.passed:
            print(f"PASS {check.name}")
        else:
            failed += 1
            print(f"FAIL {check.name}: {check.detail}")
    print(f"{len(checks)} checks, {failed} failed")
    return EXIT_ORACLE if failed else EXIT_OK


def cmd_reorder(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_config(cfg, args.parser, args.config)
    inst = _read_bundle(args.instance)
    out = _resolve(args, cfg, "out", str, "reorder.csv")
    candidates = _resolve(args, cfg, "candidates", int, 100)
    seed = _resolve(args, cfg, "seed", int, 0)
    metric_k = _resolve(args, cfg, "metric_k", int, 3)
    strategies_raw = _resolve(
        args, cfg, "strategies", str,
        "random,increasing_variance,decreasing_variance",
    )
    threads = _resolve_threads(args, cfg)
    known = {"random", "increasing_variance", "decreasing_variance"}
    strategies = {tok.strip() for tok in strategies_raw.split(",") if tok.strip()}
    unknown = strategies - known
    if unknown or not strategies:
        raise CliError(
            EXIT_PARSE,
            f"strategies must be a nonempty subset of {sorted(known)}",
        )
    g_max = solve_max_matching_value(inst.outcomes, inst.capacities)
    grid = _build_grid(
        _resolve(args, cfg, "g_grid", str),
        _resolve(args, cfg, "grid_start", float),
        _resolve(args, cfg, "grid_stop", float),
        _resolve(args, cfg, "grid_step", float),
        g_max,
    )
    rows = reorder_experiment(
        inst, grid, candidates, seed, metric_k=metric_k, threads=threads
    )
    # summary rows (random_min/mean/max) travel with the random strategy
    rows = [
        r
        for r in rows
        if (r.strategy.split("_")[0] if r.strategy.startswith("random") else r.strategy)
        in strategies
    ]
    bundle.write_reorder_csv(out, rows)
    print(f"wrote {out}: {len(rows)} rows over {len(grid)} grid points")
    return EXIT_OK


# -- argument parser -------------------------------------------------------------


def _add_grid_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--g-grid", dest="g_grid", help="explicit comma-separated floor values")
    p.add_argument("--grid-start", dest="grid_start", type=float)
    p.add_argument("--grid-stop", dest="grid_stop", type=float)
    p.add_argument("--grid-step", dest="grid_step", type=float)


def build_parser() -> _Parser:
    parser = _Parser(prog="floormatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a simulated instance bundle")
    p.add_argument("--config")
    p.add_argument("--out", help="bundle directory to write")
    p.add_argument("--n", type=int, help="number of agents (= locations)")
    p.add_argument("--rho-p", dest="rho_p", type=float, help="preference correlation [0,1)")
    p.add_argument("--rho-op", dest="rho_op", type=float, help="outcome-preference correlation (-1,1)")
    p.add_argument("--truncation-k", dest="truncation_k", type=int, help="strict-ranking depth")
    p.add_argument("--seed", type=int, help="generator seed (default 0)")
    p.set_defaults(func=cmd_gen, parser=p)

    p = sub.add_parser("gmax", help="print the maximum achievable average outcome")
    p.add_argument("instance", help="bundle directory")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gmax, parser=p)

    p = sub.add_parser("assign", help="run the mechanism once")
    p.add_argument("instance", help="bundle directory")
    p.add_argument("--config")
    p.add_argument("--g-bar", dest="g_bar", type=float, help="average-outcome floor")
    p.add_argument("--order", help="order spec (default natural)")
    p.add_argument(
        "--clamp-to-gmax",
        dest="clamp_to_gmax",
        action="store_const",
        const=True,
        help="lower the floor to the achievable maximum if above it",
    )
    p.add_argument("--matching-out", dest="matching_out", help="default matching.csv")
    p.add_argument("--trace-out", dest="trace_out", help="default trace.csv")
    p.set_defaults(func=cmd_assign, parser=p)

    p = sub.add_parser("sweep", help="run the mechanism across a floor grid")
    p.add_argument("instance", help="bundle directory")
    p.add_argument("--config")
    _add_grid_options(p)
    p.add_argument("--order", help="order spec (default natural)")
    p.add_argument("--metric-k", dest="metric_k", type=int, help="top-k cutoff (default 3)")
    p.add_argument("--out", help="default sweep.csv")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_sweep, parser=p)

    p = sub.add_parser("verify", help="run the oracle suites")
    p.add_argument("--config")
    p.add_argument("--instances", type=int, help="random instances (default 200)")
    p.add_argument("--max-n", dest="max_n", type=int, help="max agents (default 4)")
    p.add_argument(
        "--max-locations", dest="max_locations", type=int, help="max locations (default 4)"
    )
    p.add_argument("--seed", type=int, help="suite seed (default 0)")
    p.add_argument(
        "--self-test",
        dest="self_test",
        choices=sorted(_SELF_TESTS),
        help="corrupt the mechanism on purpose; the suite must then fail",
    )
    p.set_defaults(func=cmd_verify, parser=p)

    p = sub.add_parser("reorder", help="priority-order experiment")
    p.add_argument("instance", help="bundle directory")
    p.add_argument("--config")
    _add_grid_options(p)
    p.add_argument("--candidates", type=int, help="random orders per grid point (default 100)")
    p.add_argument("--seed", type=int, help="experiment seed (default 0)")
    p.add_argument("--metric-k", dest="metric_k", type=int, help="top-k cutoff (default 3)")
    p.add_argument("--strategies", help="subset of random,increasing_variance,decreasing_variance")
    p.add_argument("--out", help="default reorder.csv")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_reorder, parser=p)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except ThresholdInfeasible as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidConfig, InstanceInvalid, ModelError, bundle.BundleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
