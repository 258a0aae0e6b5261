"""Path planning for a Dubins vehicle among heading-dependent engagement zones."""

from .dubins import Configuration, DubinsPath, VehicleParams, shortest_path
from .ez_geometry import Domain, EngagementZone, in_engagement
from .planner import PlannerParams, PlanResult, plan
from .scenario import Scenario, generate_scenario, load, save
from .verify import VerificationReport, snapshot, verify_plan

__all__ = [
    "Configuration",
    "DubinsPath",
    "VehicleParams",
    "shortest_path",
    "Domain",
    "EngagementZone",
    "in_engagement",
    "PlannerParams",
    "PlanResult",
    "plan",
    "Scenario",
    "generate_scenario",
    "load",
    "save",
    "VerificationReport",
    "snapshot",
    "verify_plan",
]
