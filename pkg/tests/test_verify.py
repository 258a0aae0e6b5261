import csv
import dataclasses
import math

import numpy as np
import pytest

from ezrrt.dubins import Configuration, DubinsPath, shortest_path
from ezrrt.ez_geometry import EngagementZone, engaged_lifted, max_range
from ezrrt.planner import PlannerParams, plan
from ezrrt.scenario import load
from ezrrt.verify import (
    cardioid_points,
    ez_constraint,
    integrate_plan,
    planned_points,
    snapshot,
    trajectory_rows,
    verify_plan,
    write_snapshots_csv,
)

FIX = "tests/fixtures/"


@dataclasses.dataclass
class FakePlan:
    path: list


def straight_plan():
    return FakePlan([shortest_path(Configuration(0, 0, 0), Configuration(1, 0, 0), 0.1)])


def test_straight_plan_in_corridor_passes():
    sc = load(FIX + "corridor.json")
    rep = verify_plan(straight_plan(), sc)
    assert rep.passed
    assert rep.max_position_defect < 1e-12
    assert rep.min_ez_slack == math.inf and rep.worst_zone is None
    assert rep.to_dict()["passed"] is True


def test_head_on_zone_fails_ez_only():
    sc = dataclasses.replace(load(FIX + "corridor.json"), zones=(EngagementZone(0.55, 0.0, 0.15),))
    rep = verify_plan(straight_plan(), sc)
    assert not rep.ez_ok and rep.dynamics_ok and rep.boundary_ok and rep.domain_ok
    assert rep.min_ez_slack == pytest.approx(-0.15, abs=1e-3)


def test_shifted_plan_into_zone_is_caught():
    # zone 0.1 LU beside the corridor line; shifting the plan 0.1 LU puts it head-on
    sc = dataclasses.replace(load(FIX + "corridor.json"), zones=(EngagementZone(0.6, 0.1, 0.15),))
    assert verify_plan(straight_plan(), sc).ez_ok
    p = straight_plan().path[0]
    shifted = FakePlan([DubinsPath(p.word, p.params, Configuration(0, 0.1, 0), p.turn_radius)])
    assert not verify_plan(shifted, sc, domain_tol=1.0, boundary_tol=(1.0, 1.0)).ez_ok


def test_clipped_endpoint_and_domain_exit():
    sc = load(FIX + "corridor.json")
    rep = verify_plan(FakePlan([straight_plan().path[0].truncated(0.9)]), sc)
    assert not rep.boundary_ok and rep.end_error[0] == pytest.approx(0.1)
    out = FakePlan([DubinsPath("LSL", (1.0, 0.5, 1.0), Configuration(0, 0, 0), 0.1)])
    assert not verify_plan(out, sc).domain_ok


def test_excess_turn_rate_caught():
    sc = load(FIX + "n16_seed1.json")
    p = DubinsPath("LSL", (1.0, 0.1, 0.5), Configuration(0.0, 0.0, 0.0), 0.05)
    rep = verify_plan(FakePlan([p]), sc)
    assert not rep.dynamics_ok and rep.max_turn_rate == pytest.approx(20.0)


def test_rk4_is_fourth_order():
    from ezrrt.dubins import VehicleParams

    veh = VehicleParams.from_turn_radius(0.1)
    p = [DubinsPath("LSR", (2.0, 0.3, 1.5), Configuration(0.2, 0.2, 0.3), 0.1)]

    def defect(dt):
        t, s = integrate_plan(p, veh, dt)
        ref = planned_points(p, veh, t)
        return np.max(np.hypot(s[:, 0] - ref[:, 0], s[:, 1] - ref[:, 1]))

    ratio = defect(0.02) / defect(0.01)
    assert 13.0 < ratio < 19.0


def test_views_agree_on_integrated_states():
    sc = load(FIX + "n16_seed1.json")
    res = plan(sc, PlannerParams(max_iterations=20000))
    _, states = integrate_plan(res.path, sc.vehicle, 1e-3)
    # compare along the trajectory and along copies with rotated headings
    hits = 0
    for dpsi in (0.0, 1.0, 2.5, math.pi, 4.0, 5.5):
        s = states.copy()
        s[:, 2] += dpsi
        dyn = (ez_constraint(s, sc.zones) >= 0).any(axis=1)
        lifted = engaged_lifted(s[:, 0], s[:, 1], s[:, 2], sc.zones)
        assert (dyn == lifted).all()
        if dpsi == 0.0:
            assert not dyn.any()
        hits += int(dyn.sum())
    assert hits > 0


def test_snapshot_geometry():
    sc = load(FIX + "n16_seed1.json")
    res = plan(sc, PlannerParams(max_iterations=5000))
    snap = snapshot(res, sc, 0.3)
    assert len(snap.polylines) == sc.n_zones
    for ez, poly in zip(sc.zones, snap.polylines):
        assert poly.shape == (361, 2)
        assert np.allclose(poly[0], poly[-1])
        assert (np.hypot(poly[:, 0] - ez.x, poly[:, 1] - ez.y) <= ez.r_max + 1e-12).all()
        lam = math.atan2(snap.aircraft.y - ez.y, snap.aircraft.x - ez.x)
        xi = snap.aircraft.psi - lam - math.pi
        pt = cardioid_points(ez, snap.aircraft, np.array([lam]))[0]
        assert math.hypot(pt[0] - ez.x, pt[1] - ez.y) == pytest.approx(max_range(xi, ez.r_max), abs=1e-14)


def test_snapshot_extremes():
    ez = EngagementZone(0.5, 0.5, 0.15)
    away = Configuration(0.7, 0.5, 0.0)
    pts = cardioid_points(ez, away, np.linspace(0, 2 * np.pi, 90))
    assert np.allclose(pts, [0.5, 0.5], atol=1e-16)
    toward = Configuration(0.7, 0.5, math.pi)
    pts = cardioid_points(ez, toward, np.array([0.0, math.pi]))
    assert pts[0] == pytest.approx([0.65, 0.5]) and pts[1] == pytest.approx([0.5, 0.5])


def test_snapshot_time_range():
    sc = load(FIX + "corridor.json")
    with pytest.raises(ValueError):
        snapshot(straight_plan(), sc, 1.5)
    with pytest.raises(ValueError):
        snapshot(straight_plan(), sc, -0.1)
    assert snapshot(straight_plan(), sc, 1.0).aircraft.x == pytest.approx(1.0)


def test_snapshot_csv(tmp_path):
    sc = load(FIX + "n16_seed1.json")
    res = plan(sc, PlannerParams(max_iterations=3000))
    out = tmp_path / "snap.csv"
    write_snapshots_csv(out, [snapshot(res, sc, t, 10.0) for t in (0.0, 0.5)])
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["t", "zone_id", "theta", "x", "y"]
    assert len(rows) == 1 + 2 * (1 + sc.n_zones * 37)
    assert rows[1][1] == "aircraft"


def test_trajectory_rows():
    rows = trajectory_rows(straight_plan(), load(FIX + "corridor.json").vehicle, 0.25)
    assert [r[0] for r in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert rows[-1][1] == pytest.approx(1.0) and all(r[4] == 0.0 for r in rows)
