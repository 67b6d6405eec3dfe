import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from squintloc.geometry import (
    CartesianPoint,
    PolarPoint,
    antenna_indices,
    cartesian_to_polar,
    element_distances,
    exact_element_distance,
    fresnel_element_distance,
    near_field_bounds,
    polar_to_cartesian,
)

radii = st.floats(0.5, 500.0)
angles = st.floats(-math.radians(89.0), math.radians(89.0))


def test_broadside_identity():
    c = polar_to_cartesian(PolarPoint(1.0, 0.0))
    assert (c.x, c.y) == (1.0, 0.0)


def test_thirty_degrees():
    c = polar_to_cartesian(PolarPoint.from_degrees(60, 30))
    assert c.x == pytest.approx(60 * math.sqrt(3) / 2, abs=1e-12)
    assert c.y == pytest.approx(30.0, abs=1e-12)
    assert math.hypot(c.x, c.y) == pytest.approx(60.0)


@pytest.mark.parametrize("r,theta", [(5, -math.pi / 2), (5, math.pi / 2), (0, 0.1), (-1, 0), (math.inf, 0)])
def test_polar_domain_rejected(r, theta):
    with pytest.raises(ValueError):
        PolarPoint(r, theta)


def test_behind_array_rejected():
    with pytest.raises(ValueError):
        cartesian_to_polar(CartesianPoint(-1.0, 2.0))


@given(radii, angles)
def test_polar_cartesian_round_trip(r, theta):
    p = cartesian_to_polar(polar_to_cartesian(PolarPoint(r, theta)))
    assert p.r == pytest.approx(r, rel=1e-12)
    assert p.theta == pytest.approx(theta, abs=1e-12)


def test_indices_symmetric_half_integer():
    n = antenna_indices(4)
    assert list(n) == [-1.5, -0.5, 0.5, 1.5]
    assert list(antenna_indices(3)) == [-1.0, 0.0, 1.0]
    with pytest.raises(ValueError):
        antenna_indices(1)


def test_exact_distance_examples():
    assert exact_element_distance(CartesianPoint(3, 4), 0, 0.005) == 5
    assert exact_element_distance(CartesianPoint(3, 4), 1, 4.0) == 3
    # outermost element of a 128-element 5 mm array: sqrt(51.9615^2 + (30 - 0.3175)^2)
    v = exact_element_distance(CartesianPoint(51.9615, 30), 63.5, 0.005)
    assert v == pytest.approx(59.84186, abs=1e-4)


def test_fresnel_distance_examples():
    assert fresnel_element_distance(PolarPoint(10, 0), 0, 0.005) == 10
    # 10 + 0.25 / 20 vs the exact sqrt(100.25)
    v = fresnel_element_distance(PolarPoint(10, 0), 1, 0.5)
    assert v == pytest.approx(10.0125, abs=1e-12)
    assert abs(v - math.sqrt(100.25)) < 1e-5
    v = fresnel_element_distance(PolarPoint.from_degrees(10, 60), 1, 0.5)
    assert v == pytest.approx(10 - 0.5 * math.sqrt(3) / 2 + 0.25 * 0.25 / 20, abs=1e-12)
    assert v == pytest.approx(9.5701123, abs=1e-7)


@given(st.floats(3.0, 100.0), angles)
def test_fresnel_error_small_in_near_field(r, theta):
    # third-order remainder is bounded by (nd)^3 / (2 r^2) for the array half-aperture
    p = PolarPoint(r, theta)
    ex = element_distances(p, 128, 0.005, "exact")
    fr = element_distances(p, 128, 0.005, "fresnel")
    half = 64 * 0.005
    assert np.max(np.abs(ex - fr)) <= half**3 / (2 * r**2) + 1e-12


def test_unknown_model():
    with pytest.raises(ValueError):
        element_distances(PolarPoint(1, 0), 4, 0.1, "plane")


def test_near_field_bounds():
    lo, hi = near_field_bounds(128, 0.005, 0.01)
    assert lo == pytest.approx(0.62 * math.sqrt(0.64**3 / 0.01))
    assert (round(lo, 3), hi) == (3.174, pytest.approx(81.92))
    _, hi_edge = near_field_bounds(128, 0.005, 0.01, aperture="edge")
    assert hi_edge == pytest.approx(2 * 0.635**2 / 0.01)
    assert hi_edge == pytest.approx(80.645, abs=1e-3)
    lo, hi = near_field_bounds(256, 0.0025, 0.005)
    assert lo == pytest.approx(4.489, abs=1e-3)
    assert hi == pytest.approx(163.84)


def test_near_field_bounds_invalid():
    with pytest.raises(ValueError):
        near_field_bounds(1, 0.005, 0.01)
    with pytest.raises(ValueError):
        near_field_bounds(8, 0.005, 0.01, aperture="half")
