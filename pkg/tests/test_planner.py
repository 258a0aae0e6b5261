import copy
import math

import numpy as np
import pytest
from scipy import stats

from ezrrt.dubins import Configuration, point_at, shortest_path, wrap_pi
from ezrrt.ez_geometry import Domain, EngagementZone, config_free, segment_free
from ezrrt.planner import (
    EXHAUSTED,
    SOLVED,
    EndpointCollisionError,
    PlannerParams,
    PlanResult,
    Tree,
    audit_tree,
    lifted_distance,
    near,
    near_radius,
    nearest,
    opt_parent,
    plan,
    rewire,
    sample_free,
    steer,
)
from ezrrt.scenario import Scenario, generate_scenario

OPTIMUM = 1.4312223895809426  # (0,0,0) -> (1,1,0), R = 0.1


def grown_tree(n_zones=4, seed=3, iters=400):
    sc = generate_scenario(n_zones, seed)
    res = plan(sc, PlannerParams(max_iterations=iters, rng_seed=seed), keep_tree=True)
    return sc, res.tree


def test_params_validation():
    with pytest.raises(ValueError):
        PlannerParams(max_iterations=None, time_budget=None)
    with pytest.raises(ValueError):
        PlannerParams(goal_bias=1.0)
    with pytest.raises(ValueError):
        PlannerParams(steer_step=0.0)
    p = PlannerParams()
    assert p.near_cap == pytest.approx(0.4)
    assert p.resolved_heading_weight(0.1) == 0.1
    assert p.clock == "iterations"
    assert PlannerParams(max_iterations=None, time_budget=1.0).clock == "seconds"


def test_near_radius_formula():
    assert near_radius(1, 1.0, 0.4) == 0.0
    n = 5000
    assert near_radius(n, 1.0, 0.4) == pytest.approx((math.log(n) / n) ** (1 / 3))
    assert near_radius(3, 1.0, 0.4) == pytest.approx(0.4)  # capped


def test_steer_short_and_long():
    a = Configuration(0.1, 0.1, 0.0)
    b = Configuration(0.2, 0.1, 0.0)
    q, e = steer(a, b, 0.1, 0.2)
    assert q == b and e.total_length == pytest.approx(0.1)
    far = Configuration(0.9, 0.8, 2.0)
    q, e = steer(a, far, 0.1, 0.2)
    assert e.total_length == pytest.approx(0.2)
    full = shortest_path(a, far, 0.1)
    ref = point_at(full, 0.2)
    assert math.hypot(q.x - ref.x, q.y - ref.y) < 1e-12


def test_nearest_and_near_match_linear_scan():
    sc, tree = grown_tree(iters=600)
    hw = 0.1
    rng = np.random.default_rng(0)
    n = tree.size
    pts = [tree.config(i) for i in range(n)]
    for _ in range(300):
        q = Configuration(rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1), rng.uniform(0, 2 * np.pi))
        d = np.array([lifted_distance(p, q, hw) for p in pts])
        assert nearest(tree, q, hw) == int(np.argmin(d))
        r = rng.uniform(0.01, 0.3)
        got = near(tree, q, r, hw)
        assert list(got) == sorted(np.nonzero(d <= r)[0].tolist())
    got = near(tree, Configuration(0.5, 0.5, 0.0), 0.0, hw, include=7)
    assert 7 in got


def _oracle_parent(tree, cand, q, sc, step):
    R, v = sc.vehicle.turn_radius, sc.vehicle.v
    ranked = sorted(cand, key=lambda i: (tree.cost[i] + shortest_path(tree.config(i), q, R).total_length / v, i))
    for i in ranked:
        if segment_free(shortest_path(tree.config(i), q, R), sc.zones, sc.domain, step, q):
            return i
    return None


def test_opt_parent_matches_exhaustive_search():
    sc, tree = grown_tree(n_zones=8, seed=1, iters=500)
    params = PlannerParams()
    rng = np.random.default_rng(4)
    checked = 0
    while checked < 60:
        q = Configuration(rng.uniform(), rng.uniform(), rng.uniform(0, 2 * np.pi))
        if not config_free(q, sc.zones, sc.domain):
            continue
        cand = near(tree, q, 0.25, 0.1)
        idx, edge = opt_parent(tree, cand, q, sc, params)
        assert idx == _oracle_parent(tree, cand, q, sc, params.check_step)
        if idx is not None:
            assert edge.start == tree.config(idx)
            assert math.hypot(edge.end.x - q.x, edge.end.y - q.y) < 1e-9
        checked += 1


def test_opt_parent_skips_blocked_cheapest():
    zone = EngagementZone(0.5, 0.5, 0.15)
    sc = Scenario(zones=(zone,), start=Configuration(0.1, 0.5, 0.0), goal=Configuration(0.9, 0.5, 0.0))
    tree = Tree(sc.start, sc.domain)
    # detour node north of the zone; the direct root edge to q runs through it
    a = Configuration(0.5, 0.8, 0.0)
    tree.add_node(a, 0, shortest_path(sc.start, a, 0.1), 1.0)
    q = Configuration(0.8, 0.5, 0.0)
    idx, _ = opt_parent(tree, [0, 1], q, sc, PlannerParams())
    assert idx == 1
    assert opt_parent(tree, [0], q, sc, PlannerParams()) == (None, None)


def _oracle_rewire(tree, new, cand, sc, step):
    n = tree.size
    parent = tree.parent[:n].copy()
    cost = tree.cost[:n].copy()
    ecost = tree.edge_cost[:n].copy()
    R, v = sc.vehicle.turn_radius, sc.vehicle.v
    for j in cand:
        if j == new or j == parent[new]:
            continue
        e = shortest_path(tree.config(new), tree.config(j), R)
        d = e.total_length / v
        if cost[new] + d < cost[j] and segment_free(e, sc.zones, sc.domain, step, tree.config(j)):
            parent[j] = new
            ecost[j] = d
            # relax until every cost equals parent cost plus edge cost
            while True:
                upd = cost.copy()
                upd[1:] = cost[parent[1:]] + ecost[1:]
                if (upd == cost).all():
                    break
                cost = upd
    return parent, cost


def test_rewire_matches_sequential_oracle():
    sc, tree = grown_tree(n_zones=4, seed=2, iters=300)
    params = PlannerParams()
    rng = np.random.default_rng(9)
    total = 0
    for _ in range(40):
        new = int(rng.integers(1, tree.size))
        cand = near(tree, tree.config(new), 0.3, 0.1)
        ref_parent, ref_cost = _oracle_rewire(tree, new, cand, sc, params.check_step)
        total += rewire(tree, cand, new, sc, params)
        n = tree.size
        assert (tree.parent[:n] == ref_parent).all()
        np.testing.assert_allclose(tree.cost[:n], ref_cost, rtol=0, atol=1e-12)
        audit_tree(tree, sc, params, check_edges=False)
    assert total > 0


def test_sample_free_is_uniform_on_empty_domain():
    rng = np.random.default_rng(1)
    pts = np.array([sample_free([], Domain(), rng).as_tuple() for _ in range(4000)])
    assert stats.kstest(pts[:, 0], "uniform").pvalue > 1e-3
    assert stats.kstest(pts[:, 1], "uniform").pvalue > 1e-3
    assert stats.kstest(pts[:, 2], "uniform", args=(0, 2 * np.pi)).pvalue > 1e-3


def test_sample_free_avoids_zones_and_biases_to_goal():
    sc = generate_scenario(16, 0)
    rng = np.random.default_rng(2)
    goal_hits = 0
    for _ in range(2000):
        q = sample_free(sc.zones, sc.domain, rng, goal=sc.goal, goal_bias=0.2)
        assert config_free(q, sc.zones, sc.domain)
        goal_hits += q == sc.goal
    assert 300 < goal_hits < 500


def test_endpoint_in_zone_rejected():
    sc = Scenario(zones=(EngagementZone(0.05, 0.0, 0.15),))
    with pytest.raises(EndpointCollisionError):
        plan(sc, PlannerParams(max_iterations=10))


def test_empty_domain_solution_is_valid():
    sc = Scenario()
    res = plan(sc, PlannerParams(max_iterations=5000, rng_seed=1))
    assert res.status == SOLVED
    assert res.cost >= OPTIMUM - 1e-9
    assert res.cost == pytest.approx(sum(e.total_length for e in res.path))
    assert res.path[0].start == sc.start
    for a, b in zip(res.path, res.path[1:]):
        assert math.hypot(a.end.x - b.start.x, a.end.y - b.start.y) < 1e-9
    end = res.path[-1].end
    assert math.hypot(end.x - 1, end.y - 1) <= 0.01 and abs(wrap_pi(end.psi)) <= 0.05
    costs = [c for _, _, c in res.cost_history]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] == res.cost


def test_seed_determinism_and_prefix_property():
    sc = generate_scenario(8, 4)
    a = plan(sc, PlannerParams(max_iterations=3000, rng_seed=5))
    b = plan(sc, PlannerParams(max_iterations=3000, rng_seed=5))
    assert a.to_dict() == b.to_dict()
    c = plan(sc, PlannerParams(max_iterations=3000, rng_seed=6))
    assert c.to_dict() != a.to_dict()
    short = plan(sc, PlannerParams(max_iterations=1200, rng_seed=5))
    assert short.cost == a.cost_at(1200)
    assert short.to_dict()["cost_history"] == [h for h in a.to_dict()["cost_history"] if h[0] <= 1200]


def test_audit_mode_matches_fast_mode():
    sc = generate_scenario(4, 1)
    p = PlannerParams(max_iterations=150, rng_seed=2)
    slow = plan(sc, p, audit=True, keep_tree=True)
    fast = plan(sc, p, keep_tree=True)
    assert slow.to_dict() == fast.to_dict()
    audit_tree(fast.tree, sc, p)


def test_audit_catches_corruption():
    sc, tree = grown_tree(iters=200)
    bad = copy.deepcopy(tree)
    bad.cost[5] += 1e-3
    with pytest.raises(AssertionError):
        audit_tree(bad, sc, PlannerParams(), check_edges=False)
    bad = copy.deepcopy(tree)
    bad.parent[3] = 3
    with pytest.raises(AssertionError):
        audit_tree(bad, sc, PlannerParams(), check_edges=False)


def test_boxed_in_start_exhausts_budget():
    # the zone just ahead of the start blocks every edge out of the root
    sc = generate_scenario(8, 2)
    res = plan(sc, PlannerParams(max_iterations=3000))
    assert res.status == EXHAUSTED and res.nodes_in_tree == 1
    assert res.to_dict()["cost"] is None
    rng = np.random.default_rng(0)
    for _ in range(300):
        q = Configuration(rng.uniform(), rng.uniform(), rng.uniform(0, 2 * np.pi))
        qn, e = steer(sc.start, q, 0.1, 0.2)
        assert not segment_free(e, sc.zones, sc.domain, 0.005, qn)


def test_wall_clock_budget_stops():
    res = plan(Scenario(), PlannerParams(max_iterations=None, time_budget=0.3))
    assert res.clock == "seconds" and 0.3 <= res.elapsed < 5.0
    assert "elapsed" in res.to_dict()


def test_plan_result_round_trip():
    res = plan(generate_scenario(4, 0), PlannerParams(max_iterations=2000))
    back = PlanResult.from_dict(res.to_dict())
    assert back.to_dict() == res.to_dict()
    assert back.path == res.path
