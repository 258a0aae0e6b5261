"""Cardioid engagement-zone geometry and collision predicates.

Two equivalent views of the same constraint live here. The *dynamic* view
evaluates the cardioid range against the aircraft's relative bearing; the
*lifted* view fixes the heading and treats each zone as a static obstacle
in ``(x, y, psi)``. Scalar functions accept numpy arrays where noted.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dubins import TWO_PI, Configuration, DubinsPath, mod2pi, sample_path, wrap_pi

DEFAULT_CHECK_STEP = 0.005


@dataclass(frozen=True)
class EngagementZone:
    x: float
    y: float
    r_max: float
    r_min: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.r_min <= self.r_max):
            raise ValueError(f"need 0 <= r_min <= r_max, got r_min={self.r_min}, r_max={self.r_max}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "r_max": self.r_max, "r_min": self.r_min}

    @classmethod
    def from_dict(cls, d: dict) -> "EngagementZone":
        return cls(float(d["x"]), float(d["y"]), float(d["r_max"]), float(d.get("r_min", 0.0)))


@dataclass(frozen=True)
class Domain:
    """Closed axis-aligned operating rectangle."""

    xmin: float = 0.0
    ymin: float = 0.0
    xmax: float = 1.0
    ymax: float = 1.0

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"empty domain {self}")

    def contains(self, x, y):
        return (self.xmin <= x) & (x <= self.xmax) & (self.ymin <= y) & (y <= self.ymax)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def to_dict(self) -> dict:
        return {"xmin": self.xmin, "ymin": self.ymin, "xmax": self.xmax, "ymax": self.ymax}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        return cls(float(d["xmin"]), float(d["ymin"]), float(d["xmax"]), float(d["ymax"]))


def line_of_sight(x: float, y: float, ez: EngagementZone) -> float:
    """Angle in ``[0, 2*pi)`` of the vector from the zone center to ``(x, y)``."""
    dx, dy = x - ez.x, y - ez.y
    if dx == 0.0 and dy == 0.0:
        raise ValueError("line of sight undefined at the zone center")
    return mod2pi(math.atan2(dy, dx))


def relative_bearing(config: Configuration, ez: EngagementZone) -> float:
    """``psi - lambda - pi`` wrapped to ``(-pi, pi]``; zero when flying at the center."""
    return wrap_pi(config.psi - line_of_sight(config.x, config.y, ez) - math.pi)


def cardioid_radius(theta, lam, xi, r_max: float, r_min: float = 0.0):
    """Radius of the dynamic zone boundary at polar angle ``theta``."""
    scale = 0.5 * (np.cos(xi) + 1.0) * (r_max - r_min) + r_min
    return scale * 0.5 * (1.0 + np.sin(0.5 * np.pi - lam + theta))


def cardioid_radius_rmin0(theta, lam, xi, r_max: float):
    """Closed form of :func:`cardioid_radius` for ``r_min = 0``."""
    return 0.25 * r_max * (np.cos(xi) + 1.0) * (1.0 + np.sin(0.5 * np.pi - lam + theta))


def max_range(xi, r_max: float, r_min: float = 0.0):
    """Worst-case range along the line of sight, ``r_max/2 * (cos xi + 1)``."""
    if r_min != 0.0:
        raise ValueError("max_range requires r_min = 0")
    return 0.5 * r_max * (np.cos(xi) + 1.0)


def obstacle_cross_section(lam, psi, r_max: float):
    """Lifted obstacle radius at line-of-sight ``lam`` on the heading plane ``psi``."""
    return 0.5 * r_max * (1.0 - np.cos(psi - lam))


def in_engagement(config: Configuration, ez: EngagementZone) -> bool:
    """Lifted-space membership ``d <= rho(lambda; psi)``; the center counts as engaged."""
    dx, dy = config.x - ez.x, config.y - ez.y
    d = math.hypot(dx, dy)
    if d == 0.0:
        return True
    if d > ez.r_max:
        return False
    lam = math.atan2(dy, dx)
    return d <= float(obstacle_cross_section(lam, config.psi, ez.r_max))


def constraint_value(config: Configuration, ez: EngagementZone) -> float:
    """Dynamic-view constraint ``g = rho_max(xi) - d``; ``g <= 0`` is safe."""
    dx, dy = config.x - ez.x, config.y - ez.y
    d = math.hypot(dx, dy)
    if d == 0.0:
        return float(ez.r_max)
    return float(max_range(relative_bearing(config, ez), ez.r_max)) - d


def engaged_lifted(x, y, psi, zones: Sequence[EngagementZone]) -> np.ndarray:
    """Vectorized lifted-view predicate: engaged by any zone."""
    x, y, psi = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(psi, float))
    hit = np.zeros(x.shape, dtype=bool)
    for ez in zones:
        dx, dy = x - ez.x, y - ez.y
        d = np.hypot(dx, dy)
        lam = np.arctan2(dy, dx)
        hit |= (d == 0.0) | (d <= obstacle_cross_section(lam, psi, ez.r_max))
    return hit


def engaged_dynamic(x, y, psi, zones: Sequence[EngagementZone]) -> np.ndarray:
    """Vectorized dynamic-view predicate: ``g >= 0`` for any zone."""
    x, y, psi = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(psi, float))
    hit = np.zeros(x.shape, dtype=bool)
    for ez in zones:
        dx, dy = x - ez.x, y - ez.y
        d = np.hypot(dx, dy)
        lam = np.mod(np.arctan2(dy, dx), TWO_PI)
        xi = np.mod(psi - lam, TWO_PI) - np.pi
        hit |= (d == 0.0) | (max_range(xi, ez.r_max) - d >= 0.0)
    return hit


def config_free(config: Configuration, zones: Iterable[EngagementZone], domain: Domain) -> bool:
    if not domain.contains(config.x, config.y):
        return False
    return not any(in_engagement(config, ez) for ez in zones)


def segment_free(
    path: DubinsPath,
    zones: Sequence[EngagementZone],
    domain: Domain,
    check_step: float = DEFAULT_CHECK_STEP,
    end: Configuration | None = None,
) -> bool:
    """True iff every sample of the path at ``check_step`` spacing is free.

    ``end``, when given, is the exact configuration the path was planned to
    reach and replaces the recomputed final sample.
    """
    samples = sample_path(path, check_step)
    if end is not None:
        samples[-1] = end
    return all(config_free(q, zones, domain) for q in samples)


def cross_section_rows(
    ez: EngagementZone, psi_planes: Sequence[float], n_lambda: int = 360
) -> list[tuple[float, float, float]]:
    """``(psi_plane, lambda, rho)`` rows sweeping lambda over ``[0, 2*pi)``."""
    lam = np.arange(n_lambda) * (TWO_PI / n_lambda)
    rows = []
    for psi in psi_planes:
        rho = obstacle_cross_section(lam, psi, ez.r_max)
        rows.extend(zip([float(psi)] * n_lambda, lam.tolist(), rho.tolist()))
    return rows


def write_cross_section_csv(path, ez: EngagementZone, psi_planes: Sequence[float], n_lambda: int = 360) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["psi_plane", "lambda", "rho"])
        for row in cross_section_rows(ez, psi_planes, n_lambda):
            w.writerow([repr(v) for v in row])
