"""Command-line entry point: ``ezrrt <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 no solution within the
budget, 3 a plan failed verification.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import montecarlo as mc
from .dubins import Configuration, VehicleParams, shortest_path
from .ez_geometry import EngagementZone, write_cross_section_csv
from .planner import EndpointCollisionError, InfeasibleSpaceError, PlannerParams, PlanResult, plan
from .scenario import ScenarioFormatError, generate_scenario, load, save, screen_feasible
from .verify import snapshot, verify_plan, write_snapshots_csv, write_trajectory_csv

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_SOLUTION = 2
EXIT_VERIFY_FAILED = 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text: str, n: int | None = None, what: str = "value") -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers for {what}, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers for {what}, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"non-finite number in {what}")
    return vals


def _config_arg(text: str) -> Configuration:
    return Configuration(*_floats(text, 3, "x,y,psi"))


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _write_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_scenario(path: str):
    try:
        return load(path)
    except FileNotFoundError:
        raise InputError(f"scenario file not found: {path}")
    except ScenarioFormatError as exc:
        raise InputError(str(exc))


def _load_plan(path: str) -> PlanResult:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"plan file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if doc.get("schema") != "ezrrt.plan_result/1":
        raise InputError(f"{path}: not a plan result (schema {doc.get('schema')!r})")
    try:
        return PlanResult.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed plan result: {exc}")


def _planner_params(args) -> PlannerParams:
    extra = {}
    if args.steer_step is not None:
        extra["steer_step"] = args.steer_step
    if args.goal_bias is not None:
        extra["goal_bias"] = args.goal_bias
    try:
        if args.budget_secs is not None:
            return PlannerParams(max_iterations=None, time_budget=args.budget_secs, rng_seed=args.seed, **extra)
        return PlannerParams(max_iterations=args.budget_iters, rng_seed=args.seed, **extra)
    except ValueError as exc:
        raise InputError(str(exc))


def cmd_plan(args) -> int:
    sc = _load_scenario(args.scenario)
    params = _planner_params(args)
    try:
        res = plan(sc, params)
    except EndpointCollisionError as exc:
        raise InputError(str(exc))
    except ValueError as exc:
        raise InputError(str(exc))
    _write_json(res.to_dict(), args.out)
    if args.trajectory and res.solved:
        write_trajectory_csv(args.trajectory, res, sc.vehicle, args.trajectory_step)
    if not res.solved:
        print(f"no solution within {res.iterations} iterations ({res.nodes_in_tree} nodes)", file=sys.stderr)
        return EXIT_NO_SOLUTION
    return EXIT_OK


def cmd_scenario(args) -> int:
    try:
        vehicle = VehicleParams.from_turn_radius(args.turn_radius)
        sc = generate_scenario(args.zones, args.seed, r_max=args.r_max, vehicle=vehicle)
    except ValueError as exc:
        raise InputError(str(exc))
    if args.screen_iters:
        if not screen_feasible(sc, PlannerParams(max_iterations=args.screen_iters, rng_seed=args.seed)):
            print("scenario not solved within the screening budget", file=sys.stderr)
            save(sc, args.out)
            return EXIT_NO_SOLUTION
    save(sc, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    sc = _load_scenario(args.scenario)
    res = _load_plan(args.plan)
    if not res.solved or not res.path:
        raise InputError(f"{args.plan}: plan is not solved")
    report = verify_plan(res, sc, args.time_step)
    _write_json(report.to_dict(), args.out)
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_snapshot(args) -> int:
    sc = _load_scenario(args.scenario)
    res = _load_plan(args.plan)
    if not res.solved or not res.path:
        raise InputError(f"{args.plan}: plan is not solved")
    try:
        snaps = [snapshot(res, sc, t, args.resolution) for t in args.times]
    except ValueError as exc:
        raise InputError(str(exc))
    write_snapshots_csv(args.out, snaps)
    return EXIT_OK


def cmd_mc(args) -> int:
    try:
        if args.config:
            try:
                cfg = mc.ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read experiment config {args.config}: {exc}")
        else:
            cfg = mc.PRESETS[args.preset]()
        over = {}
        if args.zones is not None:
            over["zone_counts"] = args.zones
        if args.trials is not None:
            over["trials_per_count"] = args.trials
        if args.budgets is not None:
            over["budgets"] = args.budgets
            over["budget_kind"] = "seconds" if args.seconds else "iterations"
        if args.seed is not None:
            over["base_seed"] = args.seed
        over["parallel_workers"] = args.workers
        d = cfg.to_dict()
        d.update(over)
        cfg = mc.ExperimentConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc))

    def progress(k):
        if not args.quiet:
            print(f"\rtrial {k}/{len(cfg.zone_counts) * cfg.trials_per_count}", end="", file=sys.stderr)

    results = mc.run_experiment(cfg, progress)
    if not args.quiet:
        print(file=sys.stderr)
    paths = mc.write_outputs(results, args.out_dir)
    sys.stdout.write(paths["summary_txt"].read_text())
    return EXIT_OK


def cmd_dubins(args) -> int:
    if not args.turn_radius > 0:
        raise InputError("turn radius must be positive")
    path = shortest_path(args.start, args.goal, args.turn_radius)
    if args.json:
        _write_json({"schema": "ezrrt.dubins/1", **path.to_dict()}, None)
    else:
        print(f"{path.word} {path.total_length!r}")
    return EXIT_OK


def cmd_cross_section(args) -> int:
    try:
        ez = EngagementZone(*args.zone)
    except ValueError as exc:
        raise InputError(str(exc))
    write_cross_section_csv(args.out, ez, args.psi, args.n_lambda)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ezrrt", description="Engagement-zone-aware RRT* planning for a Dubins vehicle.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("plan", help="plan a path through a scenario")
    sp.add_argument("--scenario", required=True)
    budget = sp.add_mutually_exclusive_group(required=True)
    budget.add_argument("--budget-iters", type=int)
    budget.add_argument("--budget-secs", type=float)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="plan JSON (default: stdout)")
    sp.add_argument("--trajectory", help="also write a (t, x, y, psi, u) CSV")
    sp.add_argument("--trajectory-step", type=float, default=0.01)
    sp.add_argument("--steer-step", type=float)
    sp.add_argument("--goal-bias", type=float)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("scenario", help="generate a random scenario")
    sp.add_argument("--zones", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--r-max", type=float, default=0.15)
    sp.add_argument("--turn-radius", type=float, default=0.1)
    sp.add_argument("--screen-iters", type=int, default=0, help="require a solution within this many iterations")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("verify", help="check a plan by integrating its controls")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--time-step", type=float, default=1e-3)
    sp.add_argument("--out", help="report JSON (default: stdout)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("snapshot", help="dynamic zone shapes at given times along a plan")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--times", type=lambda s: _floats(s, what="--times"), required=True)
    sp.add_argument("--resolution", type=float, default=1.0, help="angular step in degrees")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_snapshot)

    sp = sub.add_parser("mc", help="Monte Carlo success-rate study")
    sp.add_argument("--preset", choices=sorted(mc.PRESETS), default="desk")
    sp.add_argument("--config", help="experiment config JSON (overrides --preset)")
    sp.add_argument("--zones", type=_ints)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--budgets", type=lambda s: _floats(s, what="--budgets"))
    sp.add_argument("--seconds", action="store_true", help="--budgets are wall-clock seconds")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("dubins", help="shortest Dubins path between two poses")
    sp.add_argument("--start", type=_config_arg, required=True, help="x,y,psi")
    sp.add_argument("--goal", type=_config_arg, required=True, help="x,y,psi")
    sp.add_argument("--turn-radius", type=float, default=0.1)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_dubins)

    sp = sub.add_parser("cross-section", help="lifted obstacle cross-sections of one zone")
    sp.add_argument("--zone", type=lambda s: _floats(s, 3, "x,y,r_max"), required=True, help="x,y,r_max")
    sp.add_argument("--psi", type=lambda s: _floats(s, what="--psi"), required=True, help="heading planes")
    sp.add_argument("--n-lambda", type=int, default=360)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_cross_section)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"ezrrt {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleSpaceError as exc:
        print(f"ezrrt {args.command}: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except OSError as exc:
        print(f"ezrrt {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
