"""Randomized engagement-zone scenarios and their JSON form.

Half the zone centers are uniform over the domain and the other half are
drawn from an isotropic Gaussian around the domain center, which crowds the
middle of the map. Zones that would engage the vehicle at its start or goal
pose are redrawn.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dubins import Configuration, VehicleParams
from .ez_geometry import Domain, EngagementZone, config_free, in_engagement

SCHEMA = "ezrrt.scenario/1"

DEFAULT_START = Configuration(0.0, 0.0, 0.0)
DEFAULT_GOAL = Configuration(1.0, 1.0, 0.0)
DEFAULT_VEHICLE = VehicleParams.from_turn_radius(0.1)
DEFAULT_R_MAX = 0.15
GAUSSIAN_SIGMA = 0.2
RESAMPLE_CAP = 10_000


class ScenarioFormatError(ValueError):
    """Malformed scenario file."""


class ScenarioGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    domain: Domain = field(default_factory=Domain)
    vehicle: VehicleParams = DEFAULT_VEHICLE
    zones: tuple[EngagementZone, ...] = ()
    start: Configuration = DEFAULT_START
    goal: Configuration = DEFAULT_GOAL
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "zones", tuple(self.zones))

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    def endpoints_free(self) -> bool:
        return config_free(self.start, self.zones, self.domain) and config_free(self.goal, self.zones, self.domain)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "domain": self.domain.to_dict(),
            "vehicle": {"v": self.vehicle.v, "u_max": self.vehicle.u_max},
            "zones": [ez.to_dict() for ez in self.zones],
            "start": self.start.to_dict(),
            "goal": self.goal.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return _parse(d)


def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    if key not in d:
        raise ScenarioFormatError(f"{where}: missing field '{key}'")
    return d[key]


def _num(d: dict, key: str, where: str) -> float:
    v = _need(d, key, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioFormatError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _config(d: dict, where: str) -> Configuration:
    return Configuration(_num(d, "x", where), _num(d, "y", where), _num(d, "psi", where))


def _parse(d: dict) -> Scenario:
    dom = _need(d, "domain", "scenario")
    veh = _need(d, "vehicle", "scenario")
    zones_raw = _need(d, "zones", "scenario")
    if not isinstance(zones_raw, list):
        raise ScenarioFormatError("scenario.zones: expected a list")
    try:
        domain = Domain(*(_num(dom, k, "domain") for k in ("xmin", "ymin", "xmax", "ymax")))
        vehicle = VehicleParams(_num(veh, "v", "vehicle"), _num(veh, "u_max", "vehicle"))
        zones = []
        for i, z in enumerate(zones_raw):
            where = f"zones[{i}]"
            r_min = _num(z, "r_min", where) if isinstance(z, dict) and "r_min" in z else 0.0
            zones.append(EngagementZone(_num(z, "x", where), _num(z, "y", where), _num(z, "r_max", where), r_min))
    except ScenarioFormatError:
        raise
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from exc
    seed = d.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ScenarioFormatError(f"scenario.seed: expected an integer, got {seed!r}")
    return Scenario(
        domain=domain,
        vehicle=vehicle,
        zones=tuple(zones),
        start=_config(_need(d, "start", "scenario"), "start"),
        goal=_config(_need(d, "goal", "scenario"), "goal"),
        seed=seed,
    )


def save(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


def load(path) -> Scenario:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return _parse(d)
    except ScenarioFormatError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc


def _engulfs_endpoint(ez: EngagementZone, start: Configuration, goal: Configuration) -> bool:
    return in_engagement(start, ez) or in_engagement(goal, ez)


def generate_scenario(
    n_zones: int,
    seed: int,
    domain: Domain | None = None,
    r_max: float = DEFAULT_R_MAX,
    start: Configuration = DEFAULT_START,
    goal: Configuration = DEFAULT_GOAL,
    vehicle: VehicleParams = DEFAULT_VEHICLE,
    sigma: float = GAUSSIAN_SIGMA,
) -> Scenario:
    """Random scenario: ``ceil(N/2)`` uniform centers, ``floor(N/2)`` Gaussian ones."""
    if n_zones < 0:
        raise ValueError("n_zones must be non-negative")
    domain = domain or Domain()
    rng = np.random.default_rng(seed)
    cx, cy = domain.center

    def uniform():
        return rng.uniform(domain.xmin, domain.xmax), rng.uniform(domain.ymin, domain.ymax)

    def gaussian():
        for _ in range(RESAMPLE_CAP):
            x, y = rng.normal(cx, sigma), rng.normal(cy, sigma)
            if domain.contains(x, y):
                return x, y
        raise ScenarioGenerationError("Gaussian center rejection cap exceeded")

    n_uniform = math.ceil(n_zones / 2)
    zones = []
    for k in range(n_zones):
        draw = uniform if k < n_uniform else gaussian
        for _ in range(RESAMPLE_CAP):
            x, y = draw()
            ez = EngagementZone(float(x), float(y), r_max)
            if not _engulfs_endpoint(ez, start, goal):
                zones.append(ez)
                break
        else:
            raise ScenarioGenerationError(f"zone {k} could not avoid the start/goal poses")
    return Scenario(domain=domain, vehicle=vehicle, zones=tuple(zones), start=start, goal=goal, seed=seed)


def screen_feasible(scenario: Scenario, screening_params) -> bool:
    """True iff the planner solves ``scenario`` within the screening budget."""
    from .planner import plan

    return plan(scenario, screening_params).solved


def with_zones(scenario: Scenario, zones) -> Scenario:
    return replace(scenario, zones=tuple(zones))
