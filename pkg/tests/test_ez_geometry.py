import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ezrrt import _kernels as K
from ezrrt.dubins import Configuration, shortest_path
from ezrrt.ez_geometry import (
    Domain,
    EngagementZone,
    cardioid_radius,
    cardioid_radius_rmin0,
    config_free,
    constraint_value,
    engaged_dynamic,
    engaged_lifted,
    in_engagement,
    line_of_sight,
    max_range,
    obstacle_cross_section,
    relative_bearing,
    segment_free,
    write_cross_section_csv,
)

EZ = EngagementZone(0.5, 0.5, 0.15)
angles = st.floats(-10.0, 10.0, allow_nan=False)


def test_zone_validation():
    with pytest.raises(ValueError):
        EngagementZone(0, 0, -0.1)
    with pytest.raises(ValueError):
        EngagementZone(0, 0, 0.1, r_min=0.2)
    with pytest.raises(ValueError):
        Domain(1, 0, 0, 1)


def test_head_on_reaches_r_max_and_tail_chase_is_zero():
    assert max_range(0.0, 0.15) == pytest.approx(0.15)
    assert max_range(math.pi, 0.15) == pytest.approx(0.0, abs=1e-17)
    assert max_range(math.pi / 2, 0.15) == pytest.approx(0.075)


def test_max_range_requires_rmin_zero():
    with pytest.raises(ValueError):
        max_range(0.0, 0.15, r_min=0.01)


def test_line_of_sight_and_bearing():
    assert line_of_sight(0.6, 0.5, EZ) == pytest.approx(0.0)
    assert line_of_sight(0.5, 0.4, EZ) == pytest.approx(1.5 * math.pi)
    # east of the center heading west flies straight at it
    assert relative_bearing(Configuration(0.6, 0.5, math.pi), EZ) == pytest.approx(0.0, abs=1e-12)
    assert abs(relative_bearing(Configuration(0.6, 0.5, 0.0), EZ)) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        line_of_sight(0.5, 0.5, EZ)


@settings(max_examples=500)
@given(angles, angles)
def test_cross_section_equals_max_range(lam, psi):
    xi = psi - lam - math.pi
    assert obstacle_cross_section(lam, psi, 0.15) == pytest.approx(max_range(xi, 0.15), abs=1e-12)


@settings(max_examples=500)
@given(angles, angles, angles)
def test_general_cardioid_reduces_to_rmin0_form(theta, lam, xi):
    assert cardioid_radius(theta, lam, xi, 0.15, 0.0) == pytest.approx(
        cardioid_radius_rmin0(theta, lam, xi, 0.15), abs=1e-12
    )
    r = cardioid_radius_rmin0(theta, lam, xi, 0.15)
    assert -1e-15 <= r <= 0.15 + 1e-15


def test_cardioid_along_line_of_sight_is_max_range():
    rng = np.random.default_rng(0)
    lam, xi = rng.uniform(-np.pi, np.pi, 1000), rng.uniform(-np.pi, np.pi, 1000)
    np.testing.assert_allclose(cardioid_radius_rmin0(lam, lam, xi, 0.15), max_range(xi, 0.15), atol=1e-15)


def test_rmin_shifts_the_family():
    # with r_min the tail-chase extent is r_min, not zero
    assert cardioid_radius(0.0, 0.0, math.pi, 0.15, 0.05) == pytest.approx(0.05)


def test_center_is_engaged_and_far_is_free():
    assert in_engagement(Configuration(0.5, 0.5, 1.0), EZ)
    assert not in_engagement(Configuration(0.7, 0.5, math.pi), EZ)
    assert constraint_value(Configuration(0.5, 0.5, 0.0), EZ) == pytest.approx(0.15)


def test_head_on_inside_and_tail_outside():
    near_east = 0.5 + 0.1
    assert in_engagement(Configuration(near_east, 0.5, math.pi), EZ)  # flying toward
    assert not in_engagement(Configuration(near_east, 0.5, 0.0), EZ)  # flying away


def test_boundary_counts_as_engaged():
    # at xi = pi/2 the range is exactly r_max / 2
    q = Configuration(0.5 + 0.075, 0.5, math.pi / 2)
    assert in_engagement(q, EZ)


@settings(max_examples=500)
@given(st.floats(0.2, 0.8), st.floats(0.2, 0.8), st.floats(0, 2 * math.pi, exclude_max=True))
def test_views_agree_pointwise(x, y, psi):
    q = Configuration(x, y, psi)
    lifted = in_engagement(q, EZ)
    assert lifted == bool(engaged_lifted(x, y, psi, [EZ]))
    assert lifted == bool(engaged_dynamic(x, y, psi, [EZ]))
    assert lifted == (constraint_value(q, EZ) >= 0.0)


def test_compiled_predicate_matches():
    rng = np.random.default_rng(3)
    zones = [EngagementZone(*rng.uniform(0, 1, 2), 0.15) for _ in range(8)]
    zx, zy, zr = (np.array([getattr(z, a) for z in zones]) for a in ("x", "y", "r_max"))
    bounds = np.array([0.0, 0.0, 1.0, 1.0])
    pts = np.column_stack([rng.uniform(0, 1, 20000), rng.uniform(0, 1, 20000), rng.uniform(0, 2 * np.pi, 20000)])
    ref = engaged_lifted(pts[:, 0], pts[:, 1], pts[:, 2], zones)
    got = np.array([not K.config_free(x, y, p, zx, zy, zr, bounds) for x, y, p in pts])
    assert (ref == got).all()


def test_domain_is_closed():
    d = Domain()
    assert d.contains(0.0, 1.0) and d.contains(1.0, 0.0)
    assert not d.contains(1.0 + 1e-12, 0.5)
    assert config_free(Configuration(0, 0, 0), [], d)
    assert Domain.from_dict(d.to_dict()) == d


def test_segment_free_detects_crossing():
    a, b = Configuration(0.2, 0.5, 0.0), Configuration(0.8, 0.5, 0.0)
    p = shortest_path(a, b, 0.1)
    assert not segment_free(p, [EZ], Domain())
    assert segment_free(p, [EngagementZone(0.5, 0.9, 0.15)], Domain())


def test_segment_leaving_domain_is_not_free():
    p = shortest_path(Configuration(0.5, 0.95, math.pi / 2), Configuration(0.5, 0.95, -math.pi / 2), 0.1)
    assert not segment_free(p, [], Domain())


def test_cross_section_csv(tmp_path):
    out = tmp_path / "cs.csv"
    write_cross_section_csv(out, EZ, [0.0, math.pi], n_lambda=8)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["psi_plane", "lambda", "rho"]
    assert len(rows) == 17
    psi, lam, rho = map(float, rows[5])  # psi=0, lambda=pi
    assert lam == pytest.approx(math.pi) and rho == pytest.approx(0.15)
