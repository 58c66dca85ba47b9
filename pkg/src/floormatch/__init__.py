"""Priority matching under a minimum-average-outcome floor.

The package bundles five layers:

- ``model``: instances, preference prefixes with trailing indifference,
  matchings, feasibility and metric helpers.
- ``lsap`` / ``engine``: exact max-total assignment solver with capacities
  and the incremental what-if engine the mechanism probes through.
- ``mechanism``: the sequential priority mechanism with a hard floor on the
  average realized outcome, full tracing, and fault-injection switches.
- ``oracles``: brute-force enumeration checks (efficiency, manipulability),
  worked example fixtures, and randomized property suites.
- ``simgen`` / ``ordering``: correlated synthetic instance generator and
  priority-order experiment harnesses.

``bundle`` reads and writes the on-disk instance format; ``cli`` exposes all
of it as the ``floormatch`` command.
"""

from __future__ import annotations

from .bundle import (
    BundleError,
    read_instance,
    read_matching_csv,
    write_instance,
    write_matching_csv,
    write_reorder_csv,
    write_sweep_csv,
    write_trace,
)
from .lsap import (
    InfeasibleProblem,
    PartialProblem,
    SolveResult,
    solve_max_assignment,
    solve_max_matching_value,
)
from .mechanism import (
    InstanceInvalid,
    MechanismOutcome,
    MechanismParams,
    MechanismTrace,
    ThresholdInfeasible,
    TraceRecord,
    feasible_locations,
    run_mechanism,
)
from .model import (
    TOTAL_SCORE_TOL,
    AgentPreference,
    Instance,
    Matching,
    MetricReport,
    ModelError,
    compute_metrics,
    is_feasible,
    is_g_acceptable,
    make_instance,
    matching_from_ids,
    pareto_dominates,
    realized_total,
)
from .oracles import (
    BudgetExceeded,
    CheckResult,
    ManipulationWitness,
    TradeCyclesOutcome,
    admissible_reports,
    best_matching_brute,
    check_constrained_efficiency,
    enumerate_feasible_matchings,
    example_holding,
    example_trade_cycles,
    example_two_agent,
    find_dominating_matching,
    find_manipulation,
    max_average_brute,
    run_constrained_ttc,
    run_random_property_suite,
    verify_mechanism_example_suite,
)
from .ordering import OrderingStrategy, ReorderRow, make_order, reorder_experiment
from .simgen import (
    SCENARIO_NOISE_SCALES,
    InvalidConfig,
    SimConfig,
    generate_instance,
    perturb_preferences,
    replace_preferences,
)

__version__ = "0.1.0"

__all__ = [
    "AgentPreference",
    "BudgetExceeded",
    "BundleError",
    "CheckResult",
    "InfeasibleProblem",
    "Instance",
    "InstanceInvalid",
    "InvalidConfig",
    "ManipulationWitness",
    "Matching",
    "MechanismOutcome",
    "MechanismParams",
    "MechanismTrace",
    "MetricReport",
    "ModelError",
    "OrderingStrategy",
    "PartialProblem",
    "ReorderRow",
    "SCENARIO_NOISE_SCALES",
    "SimConfig",
    "SolveResult",
    "ThresholdInfeasible",
    "TOTAL_SCORE_TOL",
    "TraceRecord",
    "TradeCyclesOutcome",
    "admissible_reports",
    "best_matching_brute",
    "check_constrained_efficiency",
    "compute_metrics",
    "enumerate_feasible_matchings",
    "example_holding",
    "example_trade_cycles",
    "example_two_agent",
    "feasible_locations",
    "find_dominating_matching",
    "find_manipulation",
    "generate_instance",
    "is_feasible",
    "is_g_acceptable",
    "make_instance",
    "make_order",
    "matching_from_ids",
    "max_average_brute",
    "pareto_dominates",
    "perturb_preferences",
    "read_instance",
    "read_matching_csv",
    "realized_total",
    "reorder_experiment",
    "replace_preferences",
    "run_constrained_ttc",
    "run_mechanism",
    "run_random_property_suite",
    "solve_max_assignment",
    "solve_max_matching_value",
    "verify_mechanism_example_suite",
    "write_instance",
    "write_matching_csv",
    "write_reorder_csv",
    "write_sweep_csv",
    "write_trace",
]
