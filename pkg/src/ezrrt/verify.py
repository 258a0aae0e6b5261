"""Independent plan verification and dynamic-zone snapshots.

The verifier flies the plan's turn-rate schedule through the vehicle
kinematics with a fixed-step RK4 integrator and evaluates every zone's
constraint ``g = rho_max(xi) - d`` on the integrated states. It does not
touch the planner's lifted-space collision code.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .dubins import Configuration, DubinsPath, VehicleParams, chain_control_profile, point_at, wrap_pi

DEFAULT_TIME_STEP = 1e-3
BOUNDARY_TOL = (0.01, 0.05)
POSITION_TOL = 1e-6
DOMAIN_TOL = 1e-9
# sampled collision checks can graze a zone between samples; see README
EZ_TOL = 1e-3


@dataclass
class VerificationReport:
    dynamics_ok: bool
    max_position_defect: float
    max_turn_rate: float
    boundary_ok: bool
    start_error: tuple[float, float]
    end_error: tuple[float, float]
    domain_ok: bool
    min_domain_margin: float
    ez_ok: bool
    min_ez_slack: float
    worst_zone: int | None
    time_step: float
    duration: float

    @property
    def passed(self) -> bool:
        return self.dynamics_ok and self.boundary_ok and self.domain_ok and self.ez_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start_error"] = list(self.start_error)
        d["end_error"] = list(self.end_error)
        d["passed"] = self.passed
        return {"schema": "ezrrt.verification/1", **d}


def _rk4_interval(state: np.ndarray, u: float, v: float, duration: float, dt: float) -> np.ndarray:
    """States at the end of each RK4 step over one constant-control interval."""
    n = max(1, math.ceil(duration / dt - 1e-9)) if duration > 0.0 else 0
    out = np.empty((n, 3))
    if n == 0:
        return out
    h = duration / n

    def f(s):
        return np.array([v * math.cos(s[2]), v * math.sin(s[2]), u])

    s = state.copy()
    for k in range(n):
        k1 = f(s)
        k2 = f(s + 0.5 * h * k1)
        k3 = f(s + 0.5 * h * k2)
        k4 = f(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = s
    return out


def integrate_plan(path: Sequence[DubinsPath], vehicle: VehicleParams, time_step: float = DEFAULT_TIME_STEP):
    """``(times, states)`` from RK4 integration of the plan's control schedule.

    Headings in ``states`` are unwrapped. Interval boundaries are always
    hit exactly so the integrator keeps its order across control switches.
    """
    if not path:
        raise ValueError("empty plan")
    state = np.array(path[0].start.as_tuple())
    times = [0.0]
    states = [state]
    for iv in chain_control_profile(list(path), vehicle):
        seg = _rk4_interval(states[-1], iv.u, vehicle.v, iv.duration, time_step)
        if len(seg):
            n = len(seg)
            times.extend(iv.t0 + iv.duration * (np.arange(1, n + 1) / n))
            states.extend(seg)
    return np.asarray(times), np.asarray(states)


def planned_points(path: Sequence[DubinsPath], vehicle: VehicleParams, times: np.ndarray) -> np.ndarray:
    """Where the plan's own geometry puts the vehicle at each time."""
    bounds = np.cumsum([0.0] + [p.total_length for p in path])
    out = np.empty((len(times), 3))
    for k, t in enumerate(times):
        s = vehicle.v * t
        j = min(int(np.searchsorted(bounds, s, side="right")) - 1, len(path) - 1)
        local = min(max(s - bounds[j], 0.0), path[j].total_length)
        q = point_at(path[j], local)
        out[k] = q.as_tuple()
    return out


def ez_constraint(states: np.ndarray, zones) -> np.ndarray:
    """``g[i, k] = rho_max(xi) - d`` for state ``i`` and zone ``k``; ``g <= 0`` is safe."""
    x = states[:, 0:1]
    y = states[:, 1:2]
    psi = states[:, 2:3]
    cx = np.array([[ez.x for ez in zones]])
    cy = np.array([[ez.y for ez in zones]])
    rmax = np.array([[ez.r_max for ez in zones]])
    d = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
    lam = np.arctan2(y - cy, x - cx)
    xi = psi - lam - np.pi
    rho_max = 0.5 * rmax * (np.cos(xi) + 1.0)
    return rho_max - d


def verify_plan(
    plan,
    scenario,
    time_step: float = DEFAULT_TIME_STEP,
    *,
    position_tol: float = POSITION_TOL,
    boundary_tol: tuple[float, float] = BOUNDARY_TOL,
    domain_tol: float = DOMAIN_TOL,
    ez_tol: float = EZ_TOL,
) -> VerificationReport:
    """Check a plan against the kinematics, boundary conditions, domain and zones."""
    path = list(plan.path)
    vehicle = scenario.vehicle
    times, states = integrate_plan(path, vehicle, time_step)

    expected = planned_points(path, vehicle, times)
    defect = float(np.max(np.hypot(states[:, 0] - expected[:, 0], states[:, 1] - expected[:, 1])))
    max_rate = max((abs(iv.u) for iv in chain_control_profile(path, vehicle)), default=0.0)
    dynamics_ok = defect <= position_tol and max_rate <= vehicle.u_max * (1.0 + 1e-12)

    def err(state, q: Configuration):
        return (float(math.hypot(state[0] - q.x, state[1] - q.y)), abs(wrap_pi(float(state[2]) - q.psi)))

    start_err = err(states[0], scenario.start)
    end_err = err(states[-1], scenario.goal)
    boundary_ok = all(e[0] <= boundary_tol[0] and e[1] <= boundary_tol[1] for e in (start_err, end_err))

    dom = scenario.domain
    margins = np.minimum.reduce(
        [states[:, 0] - dom.xmin, dom.xmax - states[:, 0], states[:, 1] - dom.ymin, dom.ymax - states[:, 1]]
    )
    min_margin = float(margins.min())
    domain_ok = min_margin >= -domain_tol

    if scenario.zones:
        slack = -ez_constraint(states, scenario.zones)
        flat = int(np.argmin(slack))
        min_slack = float(slack.flat[flat])
        worst = flat % len(scenario.zones)
    else:
        min_slack, worst = math.inf, None
    ez_ok = min_slack >= -ez_tol

    return VerificationReport(
        dynamics_ok=bool(dynamics_ok),
        max_position_defect=defect,
        max_turn_rate=float(max_rate),
        boundary_ok=bool(boundary_ok),
        start_error=start_err,
        end_error=end_err,
        domain_ok=bool(domain_ok),
        min_domain_margin=min_margin,
        ez_ok=bool(ez_ok),
        min_ez_slack=min_slack,
        worst_zone=worst,
        time_step=time_step,
        duration=float(times[-1]),
    )


def plan_state_at(path: Sequence[DubinsPath], vehicle: VehicleParams, t: float) -> Configuration:
    duration = sum(p.total_length for p in path) / vehicle.v
    if not 0.0 <= t <= duration + 1e-12:
        raise ValueError(f"time {t} outside [0, {duration}]")
    x, y, psi = planned_points(path, vehicle, np.array([min(t, duration)]))[0]
    return Configuration(x, y, psi)


def cardioid_points(ez, aircraft: Configuration, thetas: np.ndarray) -> np.ndarray:
    """Dynamic zone boundary seen from ``aircraft``, as ``(x, y)`` rows at polar angles ``thetas``."""
    dx, dy = aircraft.x - ez.x, aircraft.y - ez.y
    lam = math.atan2(dy, dx)
    xi = aircraft.psi - lam - math.pi
    rho = 0.25 * ez.r_max * (math.cos(xi) + 1.0) * (1.0 + np.sin(0.5 * math.pi - lam + thetas))
    return np.column_stack([ez.x + rho * np.cos(thetas), ez.y + rho * np.sin(thetas)])


@dataclass
class Snapshot:
    t: float
    aircraft: Configuration
    thetas: np.ndarray
    polylines: list[np.ndarray]


def snapshot(plan, scenario, t: float, resolution_deg: float = 1.0) -> Snapshot:
    """Every zone's dynamic boundary at time ``t`` along the plan."""
    q = plan_state_at(plan.path, scenario.vehicle, t)
    n = int(round(360.0 / resolution_deg))
    thetas = np.arange(n) * (2.0 * math.pi / n)
    polys = []
    for ez in scenario.zones:
        pts = cardioid_points(ez, q, thetas)
        polys.append(np.vstack([pts, pts[:1]]))  # closed
    return Snapshot(t, q, np.append(thetas, thetas[:1]), polys)


def write_snapshots_csv(path, snapshots: Sequence[Snapshot]) -> None:
    """Rows ``(t, zone_id, theta, x, y)``; the aircraft row has zone_id ``aircraft`` and its heading as theta."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "zone_id", "theta", "x", "y"])
        for snap in snapshots:
            w.writerow([repr(snap.t), "aircraft", repr(snap.aircraft.psi), repr(snap.aircraft.x), repr(snap.aircraft.y)])
            for k, poly in enumerate(snap.polylines):
                for th, (x, y) in zip(snap.thetas, poly):
                    w.writerow([repr(snap.t), k, repr(float(th)), repr(float(x)), repr(float(y))])


def trajectory_rows(plan, vehicle: VehicleParams, time_step: float = 0.01):
    """``(t, x, y, psi, u)`` samples along the plan's own geometry."""
    path = list(plan.path)
    if not path:
        return []
    duration = sum(p.total_length for p in path) / vehicle.v
    n = max(1, math.ceil(duration / time_step - 1e-9))
    times = np.append(np.arange(n) * time_step, duration)
    pts = planned_points(path, vehicle, times)
    profile = [iv for iv in chain_control_profile(path, vehicle) if iv.duration > 0.0]
    rows = []
    j = 0
    for t, (x, y, psi) in zip(times, pts):
        while j + 1 < len(profile) and t >= profile[j + 1].t0:
            j += 1
        u = profile[j].u if profile else 0.0
        rows.append((float(t), float(x), float(y), float(psi) % (2.0 * math.pi), float(u)))
    return rows


def write_trajectory_csv(path, plan, vehicle: VehicleParams, time_step: float = 0.01) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "psi", "u"])
        for row in trajectory_rows(plan, vehicle, time_step):
            w.writerow([repr(v) for v in row])
