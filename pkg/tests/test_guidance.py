"""Velocity-field guidance law: headings, flight path, speed schedule."""

import math

import numpy as np
import pytest

from glidelab.geodesy import EARTH_RADIUS, GeoPosition, haversine_distance, wrap_pi
from glidelab.guidance import (
    SpeedProfile,
    VelocityTriple,
    ZeroRange,
    evaluate_field,
    reference_flight_path,
    reference_heading,
    reference_speed,
    velocity_cartesian_to_triple,
    velocity_triple_to_cartesian,
)

NOMINAL_PROFILE = SpeedProfile.for_range(8000.0e3, 7450.0, 1500.0)


def test_speed_profile_range_scale():
    assert NOMINAL_PROFILE.tau == pytest.approx(2000.0e3)


def test_reference_speed_at_zero_range_is_target_exactly():
    assert reference_speed(0.0, NOMINAL_PROFILE) == 1500.0


def test_reference_speed_at_one_range_scale():
    # 1500 + 5950 (1 - 1/e), frozen from the profile definition
    v = reference_speed(NOMINAL_PROFILE.tau, NOMINAL_PROFILE)
    assert v == pytest.approx(5261.117325029918, rel=1e-6)


def test_reference_speed_monotone_in_range():
    d = np.linspace(0.0, 9000e3, 200)
    v = [reference_speed(x, NOMINAL_PROFILE) for x in d]
    assert all(b > a for a, b in zip(v, v[1:]))
    assert v[-1] < 7450.0


def test_equatorial_heading_is_east():
    curr = GeoPosition(EARTH_RADIUS + 50e3, 0.0, 0.0)
    targ = GeoPosition(EARTH_RADIUS + 25e3, math.radians(30.0), 0.0)
    assert abs(reference_heading(curr, targ, 7000.0)) < 1e-9


def test_meridian_heading_is_north():
    curr = GeoPosition(EARTH_RADIUS + 50e3, 0.5, 0.0)
    targ = GeoPosition(EARTH_RADIUS + 25e3, 0.5, math.radians(40.0))
    assert reference_heading(curr, targ, 7000.0) == pytest.approx(
        math.pi / 2.0, abs=1e-9)


def test_reference_flight_path_nominal_entry():
    # 100 km altitude, 25 km target, 8000 km range
    gam = reference_flight_path(100.0e3, 25.0e3, 8000.0e3)
    assert math.degrees(gam) == pytest.approx(-0.5371606, abs=1e-3)
    # consistent with the initial flight-path sampling interval
    assert math.radians(-0.55) < gam < math.radians(-0.45)


def test_reference_flight_path_signs():
    assert reference_flight_path(25.0e3, 25.0e3, 100e3) == 0.0
    assert reference_flight_path(10.0e3, 25.0e3, 100e3) > 0.0
    with pytest.raises(ZeroRange):
        reference_flight_path(100e3, 25e3, 0.0)


def test_velocity_triple_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(300):
        pos = GeoPosition(EARTH_RADIUS + rng.uniform(0, 100e3),
                          rng.uniform(-3.0, 3.0), rng.uniform(-1.2, 1.2))
        v = VelocityTriple(rng.uniform(100.0, 8000.0),
                           rng.uniform(-1.4, 1.4),
                           rng.uniform(-math.pi, math.pi))
        w = velocity_triple_to_cartesian(pos, v)
        assert abs(math.sqrt(float(w @ w)) - v.speed) < 1e-6
        back = velocity_cartesian_to_triple(pos, w)
        assert back.speed == pytest.approx(v.speed, rel=1e-12)
        assert back.flight_path == pytest.approx(v.flight_path, abs=1e-12)
        assert wrap_pi(back.heading - v.heading) == pytest.approx(0.0, abs=1e-9)


def test_field_zero_error_when_flying_the_reference():
    curr = GeoPosition(EARTH_RADIUS + 60e3, 0.2, 0.1)
    targ = GeoPosition(EARTH_RADIUS + 25e3, 1.1, -0.2)
    field = evaluate_field(curr, VelocityTriple(7000.0, 0.0, 0.0), targ,
                           NOMINAL_PROFILE)
    on_ref = VelocityTriple(field.v_ref.speed, field.v_ref.flight_path,
                            field.v_ref.heading)
    field2 = evaluate_field(curr, on_ref, targ, NOMINAL_PROFILE)
    assert np.linalg.norm(field2.v_err_cartesian) < 1e-9
    assert abs(field2.psi_err) < 1e-12
    assert abs(field2.gamma_err) < 1e-12


def _steer_kinematic(curr, targ, rng=None, steps=12000):
    """Point-mass that flies the reference field exactly each 1 s step."""
    profile = SpeedProfile.for_range(haversine_distance(curr, targ), 7450.0, 1500.0)
    h_t = targ.altitude
    for _ in range(steps):
        d = haversine_distance(curr, targ)
        if d < 1000.0:
            return d
        field = evaluate_field(curr, VelocityTriple(7450.0, 0.0, 0.0), targ, profile)
        v = field.v_ref
        dt = 1.0
        # forward Euler on the sphere, small steps keep the error tiny
        dtheta = v.speed * math.cos(v.flight_path) * math.cos(v.heading) \
            / (curr.radius * math.cos(curr.phi)) * dt
        dphi = v.speed * math.cos(v.flight_path) * math.sin(v.heading) / curr.radius * dt
        dr = v.speed * math.sin(v.flight_path) * dt
        curr = GeoPosition(curr.radius + dr, curr.theta + dtheta, curr.phi + dphi)
    return haversine_distance(curr, targ)


def test_kinematic_steering_converges():
    curr = GeoPosition(EARTH_RADIUS + 100e3, 0.0, math.radians(5.0))
    targ = GeoPosition(EARTH_RADIUS + 25e3, math.radians(70.0), math.radians(-10.0))
    assert _steer_kinematic(curr, targ) < 1000.0


@pytest.mark.slow
def test_kinematic_steering_thousand_pairs():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        curr = GeoPosition(EARTH_RADIUS + 100e3, rng.uniform(-2.5, 2.5),
                           rng.uniform(-0.6, 0.6))
        targ = GeoPosition(EARTH_RADIUS + 25e3, rng.uniform(-2.5, 2.5),
                           rng.uniform(-0.6, 0.6))
        if haversine_distance(curr, targ) < 200e3:
            continue
        assert _steer_kinematic(curr, targ) < 1000.0
