"""Batch success-rate and cost study over random screened scenarios.

With iteration budgets every trial runs the planner once at the largest
budget. A run with a smaller iteration budget draws the same random stream
and is therefore a prefix of that run, so its outcome is read off the cost
history instead of being recomputed. Wall-clock budgets get one run each.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing as mp
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dubins import VehicleParams
from .planner import PlannerParams, plan
from .scenario import DEFAULT_R_MAX, generate_scenario

SCHEMA = "ezrrt.experiment/1"
SUMMARY_COLUMNS = ("n_zones", "budget", "trials", "successes", "success_rate", "mean_cost", "cost_std")


@dataclass
class ExperimentConfig:
    zone_counts: list[int] = field(default_factory=lambda: [4, 8, 16])
    trials_per_count: int = 50
    budgets: list[float] = field(default_factory=lambda: [2000, 5000, 10000, 20000, 50000])
    budget_kind: str = "iterations"
    base_seed: int = 0
    r_max: float = DEFAULT_R_MAX
    turn_radius: float = 0.1
    # planner settings other than budget and seed
    planner: dict = field(default_factory=dict)
    parallel_workers: int = 1
    max_attempts: int = 100

    def __post_init__(self) -> None:
        if self.budget_kind not in ("iterations", "seconds"):
            raise ValueError("budget_kind must be 'iterations' or 'seconds'")
        if self.trials_per_count < 1:
            raise ValueError("trials_per_count must be >= 1")
        if not self.budgets:
            raise ValueError("need at least one budget")
        if list(self.budgets) != sorted(self.budgets) or len(set(self.budgets)) != len(self.budgets):
            raise ValueError("budgets must be strictly ascending")
        if min(self.budgets) <= 0:
            raise ValueError("budgets must be positive")
        if self.budget_kind == "iterations":
            self.budgets = [int(b) for b in self.budgets]
        if any(n < 0 for n in self.zone_counts):
            raise ValueError("zone counts must be non-negative")
        if self.parallel_workers < 1 or self.max_attempts < 1:
            raise ValueError("parallel_workers and max_attempts must be >= 1")
        bad = {"max_iterations", "time_budget", "rng_seed"} & set(self.planner)
        if bad:
            raise ValueError(f"planner overrides may not set {sorted(bad)}")
        PlannerParams(**self.planner)  # validate early

    @property
    def screening_budget(self):
        return self.budgets[-1]

    def planner_params(self, budget, seed: int) -> PlannerParams:
        if self.budget_kind == "iterations":
            return PlannerParams(max_iterations=int(budget), rng_seed=seed, **self.planner)
        return PlannerParams(max_iterations=None, time_budget=float(budget), rng_seed=seed, **self.planner)

    def to_dict(self) -> dict:
        return {"schema": "ezrrt.experiment_config/1", **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = {k: v for k, v in d.items() if k != "schema"}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment config fields: {sorted(unknown)}")
        if "planner" in d and "goal_tolerance" in d["planner"]:
            d["planner"] = {**d["planner"], "goal_tolerance": tuple(d["planner"]["goal_tolerance"])}
        return cls(**d)


def desk_preset(**overrides) -> ExperimentConfig:
    return replace(ExperimentConfig(), **overrides)


def full_preset(**overrides) -> ExperimentConfig:
    """Large wall-clock sweep; budgets are seconds and results depend on the machine."""
    cfg = ExperimentConfig(
        zone_counts=[4, 8, 20, 24],
        trials_per_count=500,
        budgets=[5, 10, 20, 40, 60, 80, 100, 120, 140, 160],
        budget_kind="seconds",
    )
    return replace(cfg, **overrides)


PRESETS = {"desk": desk_preset, "full": full_preset}


def trial_seeds(base_seed: int, n_zones: int, trial: int, attempt: int) -> tuple[int, int]:
    """``(scenario_seed, planner_seed)`` for one attempt of one trial."""
    s = np.random.SeedSequence([base_seed, n_zones, trial, attempt]).generate_state(2)
    return int(s[0]), int(s[1])


@dataclass
class TrialRecord:
    n_zones: int
    trial: int
    seed: int
    planner_seed: int
    attempts: int
    budget: float
    status: str
    cost: float | None
    first_solution_time: float | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResults:
    config: ExperimentConfig
    records: list[TrialRecord]
    # scenarios discarded by screening, per zone count
    replacements: dict[int, int]
    unscreened: dict[int, int] = field(default_factory=dict)

    def aggregates(self) -> list[dict]:
        return aggregate(self.records, self.config.zone_counts, self.config.budgets)


def aggregate(records, zone_counts, budgets) -> list[dict]:
    """One row per (zone count, budget); mean and population std over successes."""
    rows = []
    for n in zone_counts:
        for b in budgets:
            sel = [r for r in records if r.n_zones == n and r.budget == b]
            costs = [r.cost for r in sel if r.status == "solved"]
            trials = len(sel)
            rows.append(
                {
                    "n_zones": n,
                    "budget": b,
                    "trials": trials,
                    "successes": len(costs),
                    "success_rate": len(costs) / trials if trials else math.nan,
                    "mean_cost": float(np.mean(costs)) if costs else math.nan,
                    "cost_std": float(np.std(costs)) if costs else math.nan,
                }
            )
    return rows


def _run_trial(args) -> tuple[list[TrialRecord], int, bool]:
    cfg, n_zones, trial = args
    vehicle = VehicleParams.from_turn_radius(cfg.turn_radius)
    iters = cfg.budget_kind == "iterations"
    for attempt in range(cfg.max_attempts):
        sc_seed, pl_seed = trial_seeds(cfg.base_seed, n_zones, trial, attempt)
        sc = generate_scenario(n_zones, sc_seed, r_max=cfg.r_max, vehicle=vehicle)
        if not sc.endpoints_free():
            continue
        screen = plan(sc, cfg.planner_params(cfg.screening_budget, pl_seed))
        if screen.solved:
            break
    else:
        return [], cfg.max_attempts, False

    records = []
    for b in cfg.budgets:
        if iters:
            cost = screen.cost_at(b)
            first = screen.first_solution_iteration
            first = first if first is not None and first <= b else None
        else:
            res = screen if b == cfg.screening_budget else plan(sc, cfg.planner_params(b, pl_seed))
            cost = res.cost
            first = res.first_solution_time
        solved = math.isfinite(cost)
        records.append(
            TrialRecord(
                n_zones=n_zones,
                trial=trial,
                seed=sc_seed,
                planner_seed=pl_seed,
                attempts=attempt + 1,
                budget=b,
                status="solved" if solved else "infeasible_budget_exhausted",
                cost=cost if solved else None,
                first_solution_time=first if solved else None,
            )
        )
    return records, attempt, True


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentResults:
    """Run every (zone count, trial) pair; output order never depends on the worker count."""
    tasks = [(config, n, t) for n in config.zone_counts for t in range(config.trials_per_count)]
    if config.parallel_workers > 1:
        with mp.get_context("fork").Pool(config.parallel_workers) as pool:
            outs = list(_progress(pool.imap(_run_trial, tasks), progress))
    else:
        outs = list(_progress(map(_run_trial, tasks), progress))
    records: list[TrialRecord] = []
    replacements = {n: 0 for n in config.zone_counts}
    unscreened = {n: 0 for n in config.zone_counts}
    for (_, n, _), (recs, discarded, ok) in zip(tasks, outs):
        records.extend(recs)
        replacements[n] += discarded
        unscreened[n] += 0 if ok else 1
    return ExperimentResults(config, records, replacements, unscreened)


def _progress(it, cb):
    for k, x in enumerate(it):
        if cb is not None:
            cb(k + 1)
        yield x


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_summary_csv(rows, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc}") from exc


def read_summary_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            budget = float(r["budget"])
            out.append(
                {
                    "n_zones": int(r["n_zones"]),
                    "budget": int(budget) if budget.is_integer() and "." not in r["budget"] else budget,
                    "trials": int(r["trials"]),
                    "successes": int(r["successes"]),
                    "success_rate": float(r["success_rate"]) if r["success_rate"] else math.nan,
                    "mean_cost": float(r["mean_cost"]) if r["mean_cost"] else math.nan,
                    "cost_std": float(r["cost_std"]) if r["cost_std"] else math.nan,
                }
            )
    return out


def write_records_jsonl(records, path) -> None:
    try:
        with open(path, "w") as fh:
            for r in records:
                fh.write(json.dumps({"schema": "ezrrt.trial/1", **r.to_dict()}, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trial log to {path}: {exc}") from exc


def summary_text(results: ExperimentResults) -> str:
    cfg = results.config
    unit = "iters" if cfg.budget_kind == "iterations" else "s"
    lines = [
        f"zone counts {cfg.zone_counts}, {cfg.trials_per_count} trials each, budgets {cfg.budgets} {unit}",
        f"screening budget {cfg.screening_budget} {unit}; base seed {cfg.base_seed}",
    ]
    for n in cfg.zone_counts:
        lines.append(
            f"N={n}: {results.replacements[n]} scenarios replaced by screening, "
            f"{results.unscreened.get(n, 0)} trials without a feasible scenario"
        )
    lines.append(f"{'N':>4} {'budget':>8} {'success':>8} {'mean cost':>10} {'std':>8}")
    for r in results.aggregates():
        mean = "-" if math.isnan(r["mean_cost"]) else f"{r['mean_cost']:.4f}"
        std = "-" if math.isnan(r["cost_std"]) else f"{r['cost_std']:.4f}"
        lines.append(f"{r['n_zones']:>4} {r['budget']:>8} {r['success_rate']:>8.3f} {mean:>10} {std:>8}")
    return "\n".join(lines) + "\n"


def summarize(results: ExperimentResults, out_path) -> str:
    """Write the aggregate CSV to ``out_path`` and return the text summary."""
    write_summary_csv(results.aggregates(), out_path)
    return summary_text(results)


def write_outputs(results: ExperimentResults, out_dir) -> dict[str, Path]:
    """Summary CSV, per-trial JSONL, summary text and a results JSON under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary_csv": out / "summary.csv",
        "trials_jsonl": out / "trials.jsonl",
        "summary_txt": out / "summary.txt",
        "results_json": out / "results.json",
    }
    text = summarize(results, paths["summary_csv"])
    paths["summary_txt"].write_text(text)
    write_records_jsonl(results.records, paths["trials_jsonl"])
    doc = {
        "schema": SCHEMA,
        # worker count is left out so outputs do not depend on it
        "config": {k: v for k, v in results.config.to_dict().items() if k != "parallel_workers"},
        "replacements": {str(k): v for k, v in results.replacements.items()},
        "unscreened": {str(k): v for k, v in results.unscreened.items()},
        "aggregates": [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
                       for r in results.aggregates()],
    }
    paths["results_json"].write_text(json.dumps(doc, indent=2) + "\n")
    return paths
