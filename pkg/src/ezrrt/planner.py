"""Anytime RRT* over the lifted ``(x, y, psi)`` space with Dubins steering.

Edges are Dubins paths, their cost is travel time, and collision checking
uses the static lifted obstacles. The loop itself runs in compiled chunks
(:func:`ezrrt._kernels.grow`); the per-step functions below expose the same
kernels on a :class:`Tree` for inspection and testing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import _kernels as K
from .dubins import WORDS, Configuration, DubinsPath, shortest_path, wrap_pi
from .ez_geometry import DEFAULT_CHECK_STEP, Domain, EngagementZone, config_free, segment_free

if TYPE_CHECKING:
    from .scenario import Scenario

SOLVED = "solved"
EXHAUSTED = "infeasible_budget_exhausted"

CHUNK = 64
GRID = 64


class InfeasibleSpaceError(RuntimeError):
    """Rejection sampling found no free configuration."""


class EndpointCollisionError(ValueError):
    """Start or goal violates the domain or an engagement zone."""


@dataclass(frozen=True)
class PlannerParams:
    steer_step: float = 0.2
    goal_tolerance: tuple[float, float] = (0.01, 0.05)
    goal_bias: float = 0.05
    near_radius_gamma: float = 1.0
    max_iterations: int | None = 10_000
    time_budget: float | None = None
    check_step: float = DEFAULT_CHECK_STEP
    heading_weight: float | None = None  # None: use the turn radius
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations is None and self.time_budget is None:
            raise ValueError("need max_iterations or time_budget")
        if not 0.0 <= self.goal_bias < 1.0:
            raise ValueError("goal_bias must be in [0, 1)")
        for name in ("steer_step", "near_radius_gamma", "check_step"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if min(self.goal_tolerance) <= 0.0:
            raise ValueError("goal_tolerance entries must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.time_budget is not None and self.time_budget <= 0.0:
            raise ValueError("time_budget must be positive")
        if self.heading_weight is not None and self.heading_weight < 0.0:
            raise ValueError("heading_weight must be non-negative")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")

    @property
    def near_cap(self) -> float:
        return 2.0 * self.steer_step

    @property
    def clock(self) -> str:
        return "iterations" if self.time_budget is None else "seconds"

    def resolved_heading_weight(self, turn_radius: float) -> float:
        return turn_radius if self.heading_weight is None else self.heading_weight


class Tree:
    """Array-backed search tree rooted at the start configuration.

    Nodes are also bucketed on a ``GRID x GRID`` grid over the domain for
    neighbor queries.
    """

    def __init__(self, root: Configuration, domain: Domain | None = None, capacity: int = 1024):
        self.bounds = _bounds(domain or Domain())
        self.grid = GRID
        self.head = np.full(GRID * GRID, -1, dtype=np.int64)
        self.counters = np.zeros(6, dtype=np.int64)
        self.counters[5] = -1
        self._alloc(max(capacity, 2))
        self.xs[0], self.ys[0], self.ps[0] = root.as_tuple()
        self.parent[0] = -1
        self.edge_word[0] = -1
        K.grid_insert(0, root.x, root.y, self.bounds, GRID, self.head, self.nxt)
        self.counters[0] = 1

    @property
    def index(self):
        return self.bounds, self.grid, self.head, self.nxt

    def _alloc(self, cap: int) -> None:
        self.xs = np.zeros(cap)
        self.ys = np.zeros(cap)
        self.ps = np.zeros(cap)
        self.parent = np.full(cap, -1, dtype=np.int64)
        self.cost = np.zeros(cap)
        self.edge_cost = np.zeros(cap)
        self.edge_word = np.full(cap, -1, dtype=np.int64)
        self.edge_seg = np.zeros((cap, 3))
        self.first_child = np.full(cap, -1, dtype=np.int64)
        self.next_sib = np.full(cap, -1, dtype=np.int64)
        self.prev_sib = np.full(cap, -1, dtype=np.int64)
        self.stack = np.zeros(cap, dtype=np.int64)
        self.cand = np.zeros(cap, dtype=np.int64)
        self.nxt = np.full(cap, -1, dtype=np.int64)

    _ARRAYS = ("xs", "ys", "ps", "parent", "cost", "edge_cost", "edge_word", "edge_seg",
               "first_child", "next_sib", "prev_sib", "stack", "cand", "nxt")

    @property
    def capacity(self) -> int:
        return self.xs.shape[0]

    @property
    def size(self) -> int:
        return int(self.counters[0])

    def __len__(self) -> int:
        return self.size

    def reserve(self, extra: int) -> None:
        need = self.size + extra
        if need <= self.capacity:
            return
        cap = max(need, 2 * self.capacity)
        old = {name: getattr(self, name) for name in self._ARRAYS}
        self._alloc(cap)
        for name, arr in old.items():
            getattr(self, name)[: arr.shape[0]] = arr

    def config(self, i: int) -> Configuration:
        return Configuration(self.xs[i], self.ys[i], self.ps[i])

    def edge(self, i: int, turn_radius: float) -> DubinsPath | None:
        """Dubins path from ``parent[i]`` to node ``i``."""
        p = int(self.parent[i])
        if p < 0:
            return None
        w = WORDS[int(self.edge_word[i])]
        segs = self.edge_seg[i]
        params = tuple(float(s) if c == "S" else float(s) / turn_radius for c, s in zip(w, segs))
        return DubinsPath(w, params, self.config(p), turn_radius)

    def path_to(self, i: int, turn_radius: float) -> list[DubinsPath]:
        edges = []
        while self.parent[i] >= 0:
            edges.append(self.edge(i, turn_radius))
            i = int(self.parent[i])
        edges.reverse()
        return edges

    def children(self, i: int) -> list[int]:
        out = []
        c = int(self.first_child[i])
        while c >= 0:
            out.append(c)
            c = int(self.next_sib[c])
        return out

    def add_node(self, q: Configuration, parent: int, edge: DubinsPath, speed: float) -> int:
        """Append ``q`` under ``parent`` reached along ``edge``."""
        self.reserve(1)
        i = self.size
        self.xs[i], self.ys[i], self.ps[i] = q.as_tuple()
        self.parent[i] = parent
        self.edge_word[i] = WORDS.index(edge.word)
        self.edge_seg[i] = edge.segment_lengths
        self.edge_cost[i] = edge.total_length / speed
        self.cost[i] = self.cost[parent] + self.edge_cost[i]
        self.first_child[i] = self.next_sib[i] = self.prev_sib[i] = -1
        K.link_child(parent, i, self.first_child, self.next_sib, self.prev_sib)
        K.grid_insert(i, q.x, q.y, self.bounds, self.grid, self.head, self.nxt)
        self.counters[0] = i + 1
        return i


def _zone_arrays(zones: Sequence[EngagementZone]):
    for ez in zones:
        if ez.r_min != 0.0:
            raise ValueError("planner requires r_min = 0 for every zone")
    zx = np.array([ez.x for ez in zones], dtype=float)
    zy = np.array([ez.y for ez in zones], dtype=float)
    zr = np.array([ez.r_max for ez in zones], dtype=float)
    return zx, zy, zr


def _bounds(domain: Domain) -> np.ndarray:
    return np.array([domain.xmin, domain.ymin, domain.xmax, domain.ymax])


def sample_free(
    zones: Sequence[EngagementZone],
    domain: Domain,
    rng: np.random.Generator,
    goal: Configuration | None = None,
    goal_bias: float = 0.0,
) -> Configuration:
    """Uniform free configuration (rejection sampled), or the goal with probability ``goal_bias``."""
    g = np.array(goal.as_tuple() if goal is not None else (0.0, 0.0, 0.0))
    bias = goal_bias if goal is not None else 0.0
    status, _, x, y, psi = K.sample_free(rng, g, bias, *_zone_arrays(zones), _bounds(domain))
    if status != K.STATUS_OK:
        raise InfeasibleSpaceError(f"no free configuration in {K.SAMPLE_CAP} draws")
    return Configuration(x, y, psi)


def lifted_distance(a: Configuration, b: Configuration, heading_weight: float) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (heading_weight * wrap_pi(a.psi - b.psi)) ** 2)


def nearest(tree: Tree, q: Configuration, heading_weight: float) -> int:
    return int(K.nearest(tree.xs, tree.ys, tree.ps, tree.size, q.x, q.y, q.psi, heading_weight, *tree.index))


def nearest_dubins(tree: Tree, q: Configuration, turn_radius: float) -> int:
    """Node with the shortest Dubins path to ``q`` (used for goal samples)."""
    hint = nearest(tree, q, turn_radius)
    return int(
        K.nearest_dubins(tree.xs, tree.ys, tree.ps, tree.size, q.x, q.y, q.psi, turn_radius, hint, *tree.index)
    )


def steer(q_from: Configuration, q_to: Configuration, turn_radius: float, steer_step: float):
    """``(q_new, edge)``: the shortest path toward ``q_to`` cut at ``steer_step``."""
    full = shortest_path(q_from, q_to, turn_radius)
    if full.total_length <= steer_step:
        return q_to, full
    edge = full.truncated(steer_step)
    return edge.end, edge


def near_radius(n: int, gamma: float, cap: float) -> float:
    """``min(gamma * (log n / n)^(1/3), cap)``; zero for a single node."""
    return float(K.near_radius(n, gamma, cap))


def near(tree: Tree, q_new: Configuration, radius: float, heading_weight: float, include: int = -1) -> np.ndarray:
    """Node indices within ``radius`` of ``q_new`` in the lifted metric, plus ``include``."""
    out = np.empty(tree.size, dtype=np.int64)
    m = K.near(
        tree.xs, tree.ys, tree.ps, tree.size, q_new.x, q_new.y, q_new.psi, heading_weight, radius, include, out,
        *tree.index,
    )
    return out[:m].copy()


def opt_parent(tree: Tree, near_set: Sequence[int], q_new: Configuration, scenario: "Scenario", params: PlannerParams):
    """Cheapest collision-free parent for ``q_new``: ``(index, edge)`` or ``(None, None)``."""
    cand = np.asarray(sorted(near_set), dtype=np.int64)
    if cand.size == 0:
        return None, None
    R = scenario.vehicle.turn_radius
    edge = np.empty(6)
    i = K.opt_parent(
        cand, cand.size, q_new.x, q_new.y, q_new.psi, tree.xs, tree.ys, tree.ps, tree.cost,
        R, scenario.vehicle.v, *_zone_arrays(scenario.zones), _bounds(scenario.domain), params.check_step, edge,
    )
    if i < 0:
        return None, None
    w = WORDS[int(edge[0])]
    segs = edge[1:4]
    p = tuple(float(s) if c == "S" else float(s) / R for c, s in zip(w, segs))
    return int(i), DubinsPath(w, p, tree.config(i), R)


def rewire(tree: Tree, near_set: Sequence[int], new: int, scenario: "Scenario", params: PlannerParams) -> int:
    """Reparent nodes of ``near_set`` through ``new`` when strictly cheaper; returns the count."""
    cand = np.asarray(sorted(near_set), dtype=np.int64)
    return int(
        K.rewire(
            new, cand, cand.size, tree.xs, tree.ys, tree.ps, tree.parent, tree.cost, tree.edge_cost,
            tree.edge_word, tree.edge_seg, tree.first_child, tree.next_sib, tree.prev_sib, tree.stack,
            scenario.vehicle.turn_radius, scenario.vehicle.v, *_zone_arrays(scenario.zones),
            _bounds(scenario.domain), params.check_step,
        )
    )


@dataclass
class PlanResult:
    status: str
    path: list[DubinsPath]
    cost: float
    iterations: int
    nodes_in_tree: int
    clock: str
    # (iteration, elapsed seconds, cost) at every improvement of the best solution
    cost_history: list[tuple[int, float, float]] = field(default_factory=list)
    elapsed: float = 0.0
    tree: Tree | None = field(default=None, repr=False)

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    @property
    def first_solution_cost(self) -> float:
        return self.cost_history[0][2] if self.cost_history else math.inf

    @property
    def first_solution_iteration(self) -> int | None:
        return self.cost_history[0][0] if self.cost_history else None

    @property
    def first_solution_time(self) -> float | None:
        return self.cost_history[0][1] if self.cost_history else None

    def cost_at(self, iterations: int) -> float:
        """Best cost a run stopped after ``iterations`` iterations would report."""
        best = math.inf
        for it, _, c in self.cost_history:
            if it <= iterations:
                best = c
        return best

    def _t(self, entry) -> float | int:
        return entry[0] if self.clock == "iterations" else entry[1]

    def to_dict(self) -> dict:
        """JSON form; times are iteration counts unless the run used a wall-clock budget."""
        first = None
        if self.cost_history:
            first = {"time": self._t(self.cost_history[0]), "cost": self.cost_history[0][2]}
        d = {
            "schema": "ezrrt.plan_result/1",
            "status": self.status,
            "cost": self.cost if self.solved else None,
            "iterations": self.iterations,
            "nodes": self.nodes_in_tree,
            "clock": self.clock,
            "first_solution": first,
            "cost_history": [[self._t(e), e[2]] for e in self.cost_history],
            "edges": [p.to_dict() for p in self.path],
        }
        if self.clock == "seconds":
            d["elapsed"] = self.elapsed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlanResult":
        clock = d.get("clock", "iterations")
        hist = []
        for t, c in d.get("cost_history", []):
            hist.append((int(t), 0.0, c) if clock == "iterations" else (0, float(t), c))
        cost = d["cost"] if d["cost"] is not None else math.inf
        return cls(
            status=d["status"],
            path=[DubinsPath.from_dict(e) for e in d.get("edges", [])],
            cost=cost,
            iterations=d["iterations"],
            nodes_in_tree=d["nodes"],
            clock=clock,
            cost_history=hist,
            elapsed=d.get("elapsed", 0.0),
        )


def check_endpoints(scenario: "Scenario") -> None:
    for name, q in (("start", scenario.start), ("goal", scenario.goal)):
        if not config_free(q, scenario.zones, scenario.domain):
            raise EndpointCollisionError(f"{name} configuration {q} is not collision-free")


def plan(scenario: "Scenario", params: PlannerParams, *, audit: bool = False, keep_tree: bool = False) -> PlanResult:
    """Grow the tree until the iteration or wall-clock budget runs out.

    With ``audit`` the tree invariants are checked after every iteration
    (slow; meant for tests).
    """
    check_endpoints(scenario)
    zx, zy, zr = _zone_arrays(scenario.zones)
    bounds = _bounds(scenario.domain)
    R = scenario.vehicle.turn_radius
    hw = params.resolved_heading_weight(R)
    goal = np.array(scenario.goal.as_tuple())
    goal_tol = np.array(params.goal_tolerance, dtype=float)
    rng = np.random.default_rng(params.rng_seed)

    cap = CHUNK + 1 if params.max_iterations is None else params.max_iterations + 1
    tree = Tree(scenario.start, scenario.domain, capacity=cap)
    goal_nodes = np.zeros(cap, dtype=np.int64)
    hist_iter = np.zeros(cap, dtype=np.int64)
    hist_cost = np.zeros(cap)
    best = np.array([math.inf])
    history: list[tuple[int, float, float]] = []

    chunk = 1 if audit else CHUNK
    t0 = time.perf_counter()
    elapsed = 0.0
    while True:
        done = int(tree.counters[1])
        if params.max_iterations is not None and done >= params.max_iterations:
            break
        if params.time_budget is not None and elapsed >= params.time_budget:
            break
        n_iter = chunk
        if params.max_iterations is not None:
            n_iter = min(n_iter, params.max_iterations - done)
        tree.reserve(n_iter)
        if goal_nodes.shape[0] < tree.capacity:
            goal_nodes = np.resize(goal_nodes, tree.capacity)
            hist_iter = np.resize(hist_iter, tree.capacity)
            hist_cost = np.resize(hist_cost, tree.capacity)
        h0 = int(tree.counters[3])
        K.grow(
            n_iter, tree.counters, best, rng,
            tree.xs, tree.ys, tree.ps, tree.parent, tree.cost, tree.edge_cost, tree.edge_word, tree.edge_seg,
            tree.first_child, tree.next_sib, tree.prev_sib, tree.stack, tree.cand,
            goal_nodes, hist_iter, hist_cost,
            goal, goal_tol, zx, zy, zr, bounds, tree.grid, tree.head, tree.nxt,
            R, scenario.vehicle.v, params.steer_step, params.goal_bias, params.near_radius_gamma,
            params.near_cap, hw, params.check_step,
        )
        elapsed = time.perf_counter() - t0
        for h in range(h0, int(tree.counters[3])):
            history.append((int(hist_iter[h]), elapsed, float(hist_cost[h])))
        if tree.counters[4] != K.STATUS_OK:
            raise InfeasibleSpaceError(f"no free configuration in {K.SAMPLE_CAP} draws")
        if audit:
            audit_tree(tree, scenario, params)

    best_node = int(tree.counters[5])
    solved = best_node >= 0
    return PlanResult(
        status=SOLVED if solved else EXHAUSTED,
        path=tree.path_to(best_node, R) if solved else [],
        cost=float(tree.cost[best_node]) if solved else math.inf,
        iterations=int(tree.counters[1]),
        nodes_in_tree=tree.size,
        clock=params.clock,
        cost_history=history,
        elapsed=elapsed,
        tree=tree if keep_tree else None,
    )


class TreeInvariantError(AssertionError):
    pass


def audit_tree(tree: Tree, scenario: "Scenario", params: PlannerParams, check_edges: bool = True) -> None:
    """Check parent-cost recursion, acyclicity, child links and edge validity."""
    n = tree.size
    R = scenario.vehicle.turn_radius
    if tree.parent[0] != -1 or tree.cost[0] != 0.0:
        raise TreeInvariantError("root must have no parent and zero cost")
    for i in range(1, n):
        p = int(tree.parent[i])
        if not 0 <= p < n:
            raise TreeInvariantError(f"node {i} has invalid parent {p}")
        if tree.cost[i] != tree.cost[p] + tree.edge_cost[i]:
            raise TreeInvariantError(f"cost recursion broken at node {i}")
        edge = tree.edge(i, R)
        if abs(edge.total_length / scenario.vehicle.v - tree.edge_cost[i]) > 1e-9:
            raise TreeInvariantError(f"edge cost of node {i} disagrees with its path")
        end = edge.end
        if math.hypot(end.x - tree.xs[i], end.y - tree.ys[i]) > 1e-9 or abs(wrap_pi(end.psi - tree.ps[i])) > 1e-9:
            raise TreeInvariantError(f"edge into node {i} does not end at the node")
        if check_edges and not segment_free(edge, scenario.zones, scenario.domain, params.check_step, tree.config(i)):
            raise TreeInvariantError(f"edge into node {i} is in collision")
    # every node reaches the root, and child lists mirror parents
    depth = np.full(n, -1, dtype=np.int64)
    depth[0] = 0
    frontier = [0]
    while frontier:
        u = frontier.pop()
        for c in tree.children(u):
            if tree.parent[c] != u or depth[c] >= 0:
                raise TreeInvariantError(f"child list inconsistent at node {c}")
            depth[c] = depth[u] + 1
            frontier.append(c)
    if (depth < 0).any():
        raise TreeInvariantError("tree has nodes unreachable from the root (cycle or dangling)")
