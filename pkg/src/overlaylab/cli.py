"""Command-line front end for the planning/mapping/simulation pipeline.

Exit codes: 0 success, 1 check failed, 2 bad input, 3 internal failure.
stdout carries only data and summaries; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .lp import LpSolverError
from .model import (
    ModelError,
    Flow,
    PiecewiseLinearUtility,
    Topology,
    TrafficClass,
    enumerate_paths,
)
from .planner import (
    KKT_TOL,
    Plan,
    PlanningProblem,
    PlannerError,
    check_kkt,
    solve_plan,
)
from .scenarios import (
    PAPER_SCENARIOS,
    Scenario,
    ScenarioError,
    add_sites,
    build_paper_scenario,
    hop_study,
    load_bundled_topology,
    parse_graphml,
    random_path_study,
    run_experiment,
    study_csv,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class _InputError(Exception):
    pass


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _InputError(f"{path}: parse error at byte {exc.pos}: {exc.msg}") from None


def _load_topology(path: str) -> Topology:
    if path.endswith(".graphml"):
        try:
            with open(path) as fh:
                return parse_graphml(fh.read())
        except OSError as exc:
            raise _InputError(f"cannot read {path}: {exc}") from None
        except ScenarioError as exc:
            raise _InputError(str(exc)) from None
    obj = _read_json(path)
    try:
        if obj.pop("directed", False):
            for e in obj["links"]:
                e.setdefault("directed", True)
        return Topology.from_json_dict(obj)
    except (ModelError, KeyError, TypeError, ValueError) as exc:
        raise _InputError(f"{path}: {exc}") from None


def _load_problem(topology_path: str, classes_path: str, max_hops: int) -> PlanningProblem:
    topo = _load_topology(topology_path)
    obj = _read_json(classes_path)
    try:
        classes = [
            TrafficClass(
                c["id"],
                c["src"],
                c["dst"],
                int(c.get("max_sessions", 1)),
                PiecewiseLinearUtility.from_json_dict(c["utility"]),
            )
            for c in obj.get("classes", [])
        ]
        flows: dict[str, list[Flow]] = {}
        explicit = obj.get("flows", {})
        for c in classes:
            if c.id in explicit:
                flows[c.id] = [
                    Flow(f"{c.id}:{i}", c.id, tuple(route))
                    for i, route in enumerate(explicit[c.id])
                ]
            else:
                routes = enumerate_paths(topo, c.src, c.dst, max_hops)
                flows[c.id] = [
                    Flow(f"{c.id}:{i}", c.id, route) for i, route in enumerate(routes)
                ]
        return PlanningProblem(topo, classes, flows)
    except (KeyError, TypeError, ValueError) as exc:
        raise _InputError(f"{classes_path}: {exc}") from None


def _write_out(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    problem = _load_problem(args.topology, args.classes, args.max_hops)
    plan = solve_plan(problem)
    if plan.optimality != "proved-optimal":
        print("warning: search budget exhausted; plan is best-found", file=sys.stderr)
    _write_out(plan.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    problem = _load_problem(args.topology, args.classes, args.max_hops)
    try:
        plan = Plan.from_json_dict(_read_json(args.plan))
    except (KeyError, TypeError, ValueError) as exc:
        raise _InputError(f"{args.plan}: {exc}") from None
    for lid in plan.duals:
        if not problem.topology.has_link(lid):
            raise _InputError(f"plan references unknown link {lid!r}")
    for fid in plan.rates:
        if fid not in {f.id for f in problem.all_flows()}:
            raise _InputError(f"plan references unknown flow {fid!r}")
    report = check_kkt(problem, plan)
    rows = [
        ("feasibility", report.feasibility),
        ("dual-sign", report.dual_sign),
        ("complementary-slackness", report.complementary_slackness),
        ("gradient", report.gradient),
    ]
    for name, value in rows:
        print(f"{name:>24}  {value:.3e}")
    for fid, why in report.skipped_flows:
        print(f"skipped {fid}: {why}", file=sys.stderr)
    if report.ok(KKT_TOL):
        print("result: pass")
        return EXIT_OK
    print("result: fail")
    return EXIT_CHECK_FAILED


def _resolve_scenario(args) -> Scenario:
    if bool(args.scenario) == bool(args.paper):
        raise _InputError("provide exactly one of --scenario or --paper")
    if args.paper:
        try:
            scenario = build_paper_scenario(args.paper, seed=args.seed)
        except ScenarioError as exc:
            raise _InputError(str(exc)) from None
    else:
        try:
            scenario = Scenario.from_json_dict(_read_json(args.scenario))
        except (ScenarioError, ModelError, KeyError, TypeError, ValueError) as exc:
            raise _InputError(f"{args.scenario}: {exc}") from None
    if args.duration is not None:
        if args.duration <= 0:
            raise _InputError("duration must be > 0")
        scenario.duration = args.duration
    if args.dt is not None:
        scenario.dt = args.dt
    if args.gamma is not None:
        scenario.gamma = args.gamma
    return scenario


def cmd_run(args) -> int:
    scenario = _resolve_scenario(args)
    result = run_experiment(scenario)
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    trace_path = os.path.join(outdir, f"{scenario.name}-trace.csv")
    summary_path = os.path.join(outdir, f"{scenario.name}-summary.csv")
    with open(trace_path, "w") as fh:
        fh.write(result.trace.to_csv())
    with open(summary_path, "w") as fh:
        fh.write(result.summary_csv())
    print(f"wrote {trace_path} and {summary_path}", file=sys.stderr)
    sys.stdout.write(result.phase_csv())
    return EXIT_OK


def cmd_paths(args) -> int:
    topo = _load_topology(args.topology)
    try:
        routes = enumerate_paths(topo, args.src, args.dst, args.max_hops)
    except ModelError as exc:
        raise _InputError(str(exc)) from None
    for route in routes:
        print(" ".join(route))
    return EXIT_OK


def _study_topologies(names: list[str]) -> dict[str, Topology]:
    out = {}
    for name in names:
        if name.endswith(".graphml"):
            base = _load_topology(name)
            key = base.name
        else:
            try:
                base = load_bundled_topology(name)
            except ScenarioError as exc:
                raise _InputError(str(exc)) from None
            key = name
        out[key] = add_sites(base, uplink_mbps=30.0, core_mbps=10.0)
    return out


def cmd_hops(args) -> int:
    topos = _study_topologies(args.topologies)
    rows = hop_study(topos, hop_limits=tuple(range(1, args.max_hops + 1)), seed=args.seed)
    sys.stdout.write(study_csv(rows, "topology,hops,utility"))
    return EXIT_OK


def cmd_randpaths(args) -> int:
    topos = _study_topologies([args.topologies[0]])
    (topo,) = topos.values()
    rows = random_path_study(
        topo,
        k_values=tuple(args.k),
        trials=args.trials,
        seed=args.seed,
        max_hops=args.max_hops,
    )
    sys.stdout.write(study_csv(rows, "k,fraction_of_optimum"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overlaylab",
        description="Mission-utility overlay planning, weight mapping and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=7)
        p.add_argument("--max-hops", type=int, default=2)
        p.add_argument("--out", default=None)

    p = sub.add_parser("solve", help="solve the planning problem")
    p.add_argument("--topology", required=True)
    p.add_argument("--classes", required=True)
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="verify a plan against optimality conditions")
    p.add_argument("--topology", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--plan", required=True)
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="run a scenario end to end")
    p.add_argument("--scenario", default=None)
    p.add_argument("--paper", default=None, choices=PAPER_SCENARIOS)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--duration", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("paths", help="enumerate overlay routes")
    p.add_argument("--topology", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    common(p)
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("hops", help="optimal utility per hop limit")
    p.add_argument("topologies", nargs="+")
    common(p)
    p.set_defaults(func=cmd_hops)

    p = sub.add_parser("randpaths", help="utility using k random indirect paths")
    p.add_argument("topologies", nargs=1)
    p.add_argument("--k", type=int, nargs="+", default=[0, 1, 2, 4])
    p.add_argument("--trials", type=int, default=10)
    common(p)
    p.set_defaults(func=cmd_randpaths)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ModelError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LpSolverError, PlannerError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
