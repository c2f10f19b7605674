"""Curved-space parallel-navigation velocity field.

At every guidance step the field supplies a full reference velocity (speed,
flight path, heading) as a function of the vehicle's position relative to the
target. The heading reference keeps the vehicle on the great-circle arc to the
target, the flight-path reference descends toward the target altitude in
proportion to the remaining range, and the speed reference decays
exponentially with range toward the terminal speed. Nulling the tracking
error flies the vehicle down the field into the target at the commanded
terminal speed and altitude.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .geodesy import (
    EARTH_RADIUS,
    GeoPosition,
    haversine_distance,
    local_east_north,
    slerp_waypoint,
    to_unit_sphere,
    wrap_pi,
)

# Fraction of the remaining arc stepped off when linearizing the great circle.
DEFAULT_ARC_FRACTION = 1e-3


class VelocityTriple(NamedTuple):
    speed: float        # V, m/s
    flight_path: float  # gamma, rad; negative descending
    heading: float      # psi, rad from local east, positive toward north


class SpeedProfile(NamedTuple):
    v_init: float  # m/s
    v_targ: float  # m/s
    tau: float     # range scale, m

    @staticmethod
    def for_range(d_init: float, v_init: float, v_targ: float) -> "SpeedProfile":
        # tau = 2000 km works well at 8000 km range; scale proportionally.
        return SpeedProfile(v_init=v_init, v_targ=v_targ, tau=0.25 * d_init)


class ReferenceField(NamedTuple):
    v_ref: VelocityTriple
    v_err_cartesian: np.ndarray  # (3,), m/s, Earth-centered Cartesian
    psi_err: float               # rad, wrapped to (-pi, pi]
    gamma_err: float             # rad
    d: float                     # haversine distance to target, m


class ZeroRange(ValueError):
    """Reference flight path undefined at zero ground range."""


def reference_heading(curr: GeoPosition, targ: GeoPosition, speed: float,
                      arc_fraction: float = DEFAULT_ARC_FRACTION) -> float:
    """Heading of the great-circle direction from curr toward targ.

    A waypoint is slerped a small fraction of the remaining arc ahead of the
    vehicle, the chord to it is projected onto the local horizontal plane, and
    the heading of the projected direction is measured from local east,
    positive toward north (the convention under which cos(psi) drives the
    longitude rate and sin(psi) the latitude rate).
    """
    r_curr = to_unit_sphere(curr)
    r_targ = to_unit_sphere(targ)
    wp = slerp_waypoint(r_curr, r_targ, arc_fraction)
    dx = wp - r_curr
    dx_proj = dx - float(np.dot(dx, r_curr)) * r_curr
    east, north = local_east_north(r_curr)
    return math.atan2(float(np.dot(dx_proj, north)), float(np.dot(dx_proj, east)))


def reference_flight_path(h_curr: float, h_targ: float, d: float) -> float:
    """Descending reference flight-path angle closing the altitude gap over range d."""
    if d == 0.0:
        raise ZeroRange("ground range is zero")
    ratio = (h_curr - h_targ) / d
    return -math.asin(max(-1.0, min(1.0, ratio)))


def reference_speed(d: float, profile: SpeedProfile) -> float:
    """Range-scheduled reference speed: v_targ at range 0, v_init far out."""
    return profile.v_targ + (profile.v_init - profile.v_targ) * (1.0 - math.exp(-d / profile.tau))


def velocity_triple_to_cartesian(pos: GeoPosition, v: VelocityTriple) -> np.ndarray:
    """Earth-centered Cartesian velocity of the LVLH triple (V, gamma, psi) at pos."""
    n_hat = to_unit_sphere(pos)
    east, north = local_east_north(n_hat)
    horiz = v.speed * math.cos(v.flight_path)
    return (v.speed * math.sin(v.flight_path)) * n_hat \
        + (horiz * math.cos(v.heading)) * east \
        + (horiz * math.sin(v.heading)) * north


def velocity_cartesian_to_triple(pos: GeoPosition, w: np.ndarray) -> VelocityTriple:
    """Inverse of velocity_triple_to_cartesian (speed 0 maps to zero angles)."""
    n_hat = to_unit_sphere(pos)
    east, north = local_east_north(n_hat)
    speed = math.sqrt(float(np.dot(w, w)))
    if speed == 0.0:
        return VelocityTriple(0.0, 0.0, 0.0)
    up = float(np.dot(w, n_hat))
    gamma = math.asin(max(-1.0, min(1.0, up / speed)))
    psi = math.atan2(float(np.dot(w, north)), float(np.dot(w, east)))
    return VelocityTriple(speed, gamma, psi)


def evaluate_field(curr_pos: GeoPosition, curr_v: VelocityTriple, targ: GeoPosition,
                   profile: SpeedProfile,
                   arc_fraction: float = DEFAULT_ARC_FRACTION) -> ReferenceField:
    """Reference velocity field and tracking errors at the current state."""
    d = haversine_distance(curr_pos, targ, EARTH_RADIUS)
    psi_ref = reference_heading(curr_pos, targ, curr_v.speed, arc_fraction)
    gamma_ref = reference_flight_path(curr_pos.altitude, targ.altitude, d)
    v_ref = VelocityTriple(reference_speed(d, profile), gamma_ref, psi_ref)
    v_err = velocity_triple_to_cartesian(curr_pos, curr_v) - velocity_triple_to_cartesian(curr_pos, v_ref)
    return ReferenceField(
        v_ref=v_ref,
        v_err_cartesian=v_err,
        psi_err=wrap_pi(curr_v.heading - psi_ref),
        gamma_err=curr_v.flight_path - gamma_ref,
        d=d,
    )
