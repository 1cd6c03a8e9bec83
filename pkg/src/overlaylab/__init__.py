"""Desk-scale lab for mission-utility overlay planning and rate control.

The package covers the full pipeline: an exact planner for session counts and
per-path rates under link capacities, extraction of capacity shadow prices,
mapping of the plan onto weighted proportionally-fair transport controllers,
and a deterministic fluid simulator with fixed-rate and unit-weight baselines.
"""
from .model import (
    ModelError,
    Link,
    Topology,
    Piece,
    PiecewiseLinearUtility,
    TrafficClass,
    Flow,
    eval_utility,
    cumulative_utility,
    enumerate_paths,
    sample_random_paths,
)
from .lp import LpSolverError, LpSolution, solve_lp
from .planner import (
    PlannerError,
    PlannerConfig,
    PlanningProblem,
    Plan,
    KktReport,
    solve_plan,
    check_kkt,
    KKT_TOL,
)
from .weights import (
    WeightError,
    TransportConfig,
    GradientMatchReport,
    compute_weights,
    check_gradient_match,
)
from .sim import Simulator, SimEvent, SimTrace, RATE_FLOOR, DEFAULT_DT
from .scenarios import (
    ScenarioError,
    Scenario,
    ScenarioEvent,
    ExperimentResult,
    PAPER_SCENARIOS,
    parse_graphml,
    load_bundled_topology,
    add_sites,
    build_paper_scenario,
    run_experiment,
    hop_study,
    random_path_study,
    robustness_sweep,
    demand_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ModelError",
    "Link",
    "Topology",
    "Piece",
    "PiecewiseLinearUtility",
    "TrafficClass",
    "Flow",
    "eval_utility",
    "cumulative_utility",
    "enumerate_paths",
    "sample_random_paths",
    "LpSolverError",
    "LpSolution",
    "solve_lp",
    "PlannerError",
    "PlannerConfig",
    "PlanningProblem",
    "Plan",
    "KktReport",
    "solve_plan",
    "check_kkt",
    "KKT_TOL",
    "WeightError",
    "TransportConfig",
    "GradientMatchReport",
    "compute_weights",
    "check_gradient_match",
    "Simulator",
    "SimEvent",
    "SimTrace",
    "RATE_FLOOR",
    "DEFAULT_DT",
    "ScenarioError",
    "Scenario",
    "ScenarioEvent",
    "ExperimentResult",
    "PAPER_SCENARIOS",
    "parse_graphml",
    "load_bundled_topology",
    "add_sites",
    "build_paper_scenario",
    "run_experiment",
    "hop_study",
    "random_path_study",
    "robustness_sweep",
    "demand_sweep",
    "__version__",
]
