"""Dubins shortest paths for a constant-speed, turn-rate-limited vehicle.

A path is three segments drawn from left/right turns at the minimum radius
(``L``/``R``) and straights (``S``). In the lifted ``(x, y, psi)`` space a turn
is a helix of radius ``R`` whose heading advances linearly with arc length,
and a straight is a line on a constant-heading plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

TWO_PI = 2.0 * math.pi

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
_SIGN = {"L": 1, "S": 0, "R": -1}
# numeric turn direction per word/segment; straight segments are 0
WORD_SIGNS = tuple(tuple(_SIGN[c] for c in w) for w in WORDS)

ENDPOINT_TOL = 1e-9
_SNAP = 1e-10


def mod2pi(angle: float) -> float:
    """Reduce an angle to ``[0, 2*pi)``."""
    a = angle - TWO_PI * math.floor(angle / TWO_PI)
    if a < 0.0:
        # tiny negatives whose quotient underflows to -0
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


def wrap_pi(angle: float) -> float:
    """Reduce an angle to ``(-pi, pi]``."""
    a = mod2pi(angle)
    if a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class Configuration:
    """Point ``(x, y, psi)`` of the lifted space; ``psi`` kept in ``[0, 2*pi)``."""

    x: float
    y: float
    psi: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "psi", mod2pi(float(self.psi)))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.psi)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "psi": self.psi}

    @classmethod
    def from_dict(cls, d: dict) -> "Configuration":
        return cls(d["x"], d["y"], d["psi"])


@dataclass(frozen=True)
class VehicleParams:
    v: float = 1.0
    u_max: float = 10.0

    def __post_init__(self) -> None:
        if not (self.v > 0.0 and self.u_max > 0.0):
            raise ValueError(f"speed and turn rate must be positive, got v={self.v}, u_max={self.u_max}")

    @property
    def turn_radius(self) -> float:
        return self.v / self.u_max

    @classmethod
    def from_turn_radius(cls, turn_radius: float, v: float = 1.0) -> "VehicleParams":
        return cls(v=v, u_max=v / turn_radius)


@dataclass(frozen=True)
class DubinsPath:
    """Three-segment path. ``params`` are arc angles (rad) for turns and
    lengths (LU) for straights."""

    word: str
    params: tuple[float, float, float]
    start: Configuration
    turn_radius: float
    _seg_lengths: tuple[float, float, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.word not in WORDS:
            raise ValueError(f"unknown Dubins word {self.word!r}")
        if self.turn_radius <= 0.0:
            raise ValueError("turn_radius must be positive")
        params = tuple(float(p) for p in self.params)
        if len(params) != 3 or min(params) < 0.0:
            raise ValueError(f"params must be three non-negative values, got {self.params}")
        object.__setattr__(self, "params", params)
        lengths = tuple(
            p if c == "S" else p * self.turn_radius for c, p in zip(self.word, params)
        )
        object.__setattr__(self, "_seg_lengths", lengths)

    @property
    def segment_lengths(self) -> tuple[float, float, float]:
        return self._seg_lengths

    @property
    def total_length(self) -> float:
        a, b, c = self._seg_lengths
        return a + b + c

    @property
    def end(self) -> Configuration:
        return point_at(self, self.total_length)

    def truncated(self, length: float) -> "DubinsPath":
        """The prefix of this path with arc length ``min(length, total_length)``."""
        remaining = max(0.0, length)
        out = []
        for c, seg in zip(self.word, self._seg_lengths):
            take = min(seg, remaining)
            remaining -= take
            out.append(take if c == "S" else take / self.turn_radius)
        return DubinsPath(self.word, tuple(out), self.start, self.turn_radius)

    def to_dict(self) -> dict:
        return {
            "word": self.word,
            "params": list(self.params),
            "start": self.start.to_dict(),
            "turn_radius": self.turn_radius,
            "length": self.total_length,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DubinsPath":
        return cls(d["word"], tuple(d["params"]), Configuration.from_dict(d["start"]), d["turn_radius"])


def _snap(a: float) -> float:
    # mod2pi may land a hair below 2*pi where 0 is meant
    return 0.0 if a > TWO_PI - _SNAP else a


def word_solution(word: str, alpha: float, beta: float, d: float) -> tuple[float, float, float] | None:
    """Normalized segment parameters ``(t, p, q)`` for one word, or ``None``.

    Inputs are in the frame where the start is at the origin, the goal lies
    on the positive x-axis at distance ``d`` (in turn radii), and ``alpha`` /
    ``beta`` are the start/goal headings in that frame. Turn params are arc
    angles; a straight's param is its length in turn radii.
    """
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    cab = math.cos(alpha - beta)
    if word == "LSL":
        p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb)
        if p2 < 0.0:
            return None
        tmp = math.atan2(cb - ca, d + sa - sb)
        return _snap(mod2pi(tmp - alpha)), math.sqrt(p2), _snap(mod2pi(beta - tmp))
    if word == "RSR":
        p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa)
        if p2 < 0.0:
            return None
        tmp = math.atan2(ca - cb, d - sa + sb)
        return _snap(mod2pi(alpha - tmp)), math.sqrt(p2), _snap(mod2pi(tmp - beta))
    if word == "LSR":
        p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb)
        if p2 < 0.0:
            return None
        p = math.sqrt(p2)
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        return _snap(mod2pi(tmp - alpha)), p, _snap(mod2pi(tmp - beta))
    if word == "RSL":
        p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb)
        if p2 < 0.0:
            return None
        p = math.sqrt(p2)
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        return _snap(mod2pi(alpha - tmp)), p, _snap(mod2pi(beta - tmp))
    if word == "RLR":
        c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0
        if abs(c) > 1.0:
            return None
        p = mod2pi(TWO_PI - math.acos(c))
        t = _snap(mod2pi(alpha - math.atan2(ca - cb, d - sa + sb) + p / 2.0))
        return t, p, _snap(mod2pi(alpha - beta - t + p))
    if word == "LRL":
        c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0
        if abs(c) > 1.0:
            return None
        p = mod2pi(TWO_PI - math.acos(c))
        t = _snap(mod2pi(-alpha - math.atan2(ca - cb, d + sa - sb) + p / 2.0))
        return t, p, _snap(mod2pi(beta - alpha - t + p))
    raise ValueError(f"unknown Dubins word {word!r}")


def _normalized_frame(start: Configuration, goal: Configuration, turn_radius: float):
    dx = goal.x - start.x
    dy = goal.y - start.y
    d = math.hypot(dx, dy) / turn_radius
    phi = math.atan2(dy, dx) if d > 0.0 else 0.0
    return mod2pi(start.psi - phi), mod2pi(goal.psi - phi), d


def _to_path(word: str, tpq, start: Configuration, turn_radius: float) -> DubinsPath:
    t, p, q = tpq
    # straights carry their length in LU, not turn radii
    params = tuple(v * turn_radius if c == "S" else v for c, v in zip(word, (t, p, q)))
    return DubinsPath(word, params, start, turn_radius)


def all_paths(start: Configuration, goal: Configuration, turn_radius: float) -> dict[str, DubinsPath]:
    """Every feasible word's path from ``start`` to ``goal``."""
    alpha, beta, d = _normalized_frame(start, goal, turn_radius)
    out = {}
    for word in WORDS:
        tpq = word_solution(word, alpha, beta, d)
        if tpq is not None:
            out[word] = _to_path(word, tpq, start, turn_radius)
    return out


def shortest_path(start: Configuration, goal: Configuration, turn_radius: float) -> DubinsPath:
    """Minimum-length Dubins path; ties go to the earlier word in ``WORDS``."""
    if turn_radius <= 0.0:
        raise ValueError("turn_radius must be positive")
    alpha, beta, d = _normalized_frame(start, goal, turn_radius)
    best = None
    best_len = math.inf
    for word in WORDS:
        tpq = word_solution(word, alpha, beta, d)
        if tpq is None:
            continue
        length = tpq[0] + tpq[1] + tpq[2]
        if length < best_len:
            best, best_len = (word, tpq), length
    assert best is not None  # LSL or RSR always exists
    return _to_path(best[0], best[1], start, turn_radius)


def advance(x: float, y: float, psi: float, sign: int, length: float, turn_radius: float):
    """Move ``length`` along one segment of turn direction ``sign``.

    Heading is accumulated without wrapping.
    """
    if sign == 0:
        return x + length * math.cos(psi), y + length * math.sin(psi), psi
    a = length / turn_radius
    npsi = psi + sign * a
    return (
        x + sign * turn_radius * (math.sin(npsi) - math.sin(psi)),
        y - sign * turn_radius * (math.cos(npsi) - math.cos(psi)),
        npsi,
    )


def point_at(path: DubinsPath, s: float) -> Configuration:
    """Configuration at arc length ``s`` along ``path``."""
    total = path.total_length
    if s < 0.0 or s > total + 1e-12:
        raise ValueError(f"arc length {s} outside [0, {total}]")
    x, y, psi = path.start.as_tuple()
    remaining = min(s, total)
    for c, seg in zip(path.word, path.segment_lengths):
        take = min(seg, remaining)
        x, y, psi = advance(x, y, psi, _SIGN[c], take, path.turn_radius)
        remaining -= take
        if remaining <= 0.0:
            break
    return Configuration(x, y, psi)


def sample_arclengths(total_length: float, step: float) -> np.ndarray:
    """``0, step, 2*step, ...`` strictly below ``total_length``, then ``total_length``."""
    if step <= 0.0:
        raise ValueError("step must be positive")
    n = math.ceil(total_length / step - 1e-9) if total_length > 0.0 else 0
    s = np.arange(n, dtype=float) * step
    return np.append(s, total_length)


def sample_path(path: DubinsPath, step: float) -> list[Configuration]:
    return [point_at(path, s) for s in sample_arclengths(path.total_length, step)]


def iter_segments(path: DubinsPath) -> Iterator[tuple[int, float]]:
    """``(turn sign, length)`` per segment."""
    for c, seg in zip(path.word, path.segment_lengths):
        yield _SIGN[c], seg


@dataclass(frozen=True)
class ControlInterval:
    t0: float
    duration: float
    u: float


def control_profile(path: DubinsPath, vehicle: VehicleParams) -> list[ControlInterval]:
    """Piecewise-constant turn-rate schedule that flies ``path`` at speed ``v``.

    The turn rate on arcs is ``v / path.turn_radius``, which exceeds
    ``u_max`` only if the path was built with a tighter radius than the
    vehicle allows.
    """
    rate = vehicle.v / path.turn_radius
    out = []
    t = 0.0
    for sign, seg in iter_segments(path):
        dur = seg / vehicle.v
        out.append(ControlInterval(t, dur, sign * rate))
        t += dur
    return out


def chain_control_profile(paths: list[DubinsPath], vehicle: VehicleParams) -> list[ControlInterval]:
    """Concatenated schedule for consecutive edges."""
    out = []
    t = 0.0
    for path in paths:
        for iv in control_profile(path, vehicle):
            out.append(ControlInterval(t, iv.duration, iv.u))
            t += iv.duration
    return out
