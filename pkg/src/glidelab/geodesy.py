"""Spherical-Earth geometry: coordinate conversions, great-circle math, local frames.

Conventions: longitude theta and latitude phi in radians, theta wrapped to
(-pi, pi], phi in [-pi/2, pi/2]. Positions carry a radius R measured from the
Earth's center in meters. Unit-sphere vectors are plain (3,) numpy arrays.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

EARTH_RADIUS = 6378.0e3  # m

_DEGENERATE_DOT = 1.0 - 1e-12
_POLE_Z = 1.0 - 1e-9

Z_AXIS = np.array([0.0, 0.0, 1.0])


class GeodesyError(ValueError):
    pass


class DegenerateArc(GeodesyError):
    """Great-circle arc undefined: endpoints coincident or antipodal."""


class PoleSingularity(GeodesyError):
    """Local east/heading undefined at the poles."""


class Unreachable(GeodesyError):
    """No longitude exists at the requested great-circle distance."""


class GeoPosition(NamedTuple):
    radius: float  # m from Earth center
    theta: float   # longitude, rad
    phi: float     # latitude, rad

    @property
    def altitude(self) -> float:
        return self.radius - EARTH_RADIUS


class LocalFrame(NamedTuple):
    n_hat: np.ndarray  # unit normal to the local horizontal plane (radial)
    x_hat: np.ndarray  # unit vector along the local parallel of latitude, n_hat x z_hat
    z_hat: np.ndarray  # Earth polar axis


def wrap_pi(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def to_unit_sphere(pos: GeoPosition) -> np.ndarray:
    """Direction of `pos` on the unit sphere; the radius is discarded."""
    cphi = math.cos(pos.phi)
    return np.array([cphi * math.cos(pos.theta),
                     cphi * math.sin(pos.theta),
                     math.sin(pos.phi)])


def haversine_distance(a: GeoPosition, b: GeoPosition, sphere_radius: float = EARTH_RADIUS) -> float:
    """Great-circle arc length between the lon/lat of a and b on the given sphere."""
    sdphi = math.sin(0.5 * (b.phi - a.phi))
    sdtheta = math.sin(0.5 * (b.theta - a.theta))
    h = sdphi * sdphi + math.cos(a.phi) * math.cos(b.phi) * sdtheta * sdtheta
    return 2.0 * sphere_radius * math.asin(min(1.0, math.sqrt(h)))


def arc_angle(r_a_u: np.ndarray, r_b_u: np.ndarray) -> float:
    """Central angle between two unit vectors, in [0, pi]."""
    return math.acos(max(-1.0, min(1.0, float(np.dot(r_a_u, r_b_u)))))


def slerp_waypoint(r_curr_u: np.ndarray, r_targ_u: np.ndarray, dr: float) -> np.ndarray:
    """Point a fraction dr along the great-circle arc from r_curr_u to r_targ_u.

    Standard spherical linear interpolation; near-coincident endpoints fall
    back to chordal interpolation, which shares the same arc plane and is the
    numerically exact small-angle limit. Antipodal endpoints have no unique
    arc and raise.
    """
    dot = float(np.dot(r_curr_u, r_targ_u))
    if dot <= -_DEGENERATE_DOT:
        raise DegenerateArc(f"arc endpoints antipodal (dot={dot!r})")
    if dot >= _DEGENERATE_DOT:
        w = r_curr_u + dr * (r_targ_u - r_curr_u)
        norm = math.sqrt(float(np.dot(w, w)))
        if norm == 0.0:
            raise DegenerateArc("arc endpoints coincident")
        return w / norm
    ang = math.acos(dot)
    s = math.sin(ang)
    return (math.sin((1.0 - dr) * ang) / s) * r_curr_u + (math.sin(dr * ang) / s) * r_targ_u


def local_frame(r_curr_u: np.ndarray) -> LocalFrame:
    """Local axes at a point on the unit sphere.

    n_hat is the outward radial, x_hat = normalize(n_hat x z_hat) lies along
    the local parallel of latitude (pointing west), z_hat is the polar axis.
    """
    if abs(float(r_curr_u[2])) >= _POLE_Z:
        raise PoleSingularity("local parallel of latitude undefined at the poles")
    x = np.cross(r_curr_u, Z_AXIS)
    x /= math.sqrt(float(np.dot(x, x)))
    return LocalFrame(n_hat=r_curr_u, x_hat=x, z_hat=Z_AXIS)


def local_east_north(r_curr_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit east (increasing longitude) and north (increasing latitude) tangents."""
    if abs(float(r_curr_u[2])) >= _POLE_Z:
        raise PoleSingularity("local east undefined at the poles")
    east = np.cross(Z_AXIS, r_curr_u)
    east /= math.sqrt(float(np.dot(east, east)))
    north = np.cross(r_curr_u, east)
    return east, north


def place_target(init: GeoPosition, target_lat: float, d_init: float,
                 sphere_radius: float = EARTH_RADIUS,
                 target_altitude: float = 25.0e3,
                 tol: float = 1.0) -> GeoPosition:
    """Target at the given latitude, eastward of init, at great-circle range d_init.

    The longitude is solved by bisection on the longitude offset in [0, pi];
    the haversine distance is monotone in that offset away from the poles.
    """
    def dist(dlon: float) -> float:
        return haversine_distance(init, GeoPosition(sphere_radius, init.theta + dlon, target_lat),
                                  sphere_radius)

    lo, hi = 0.0, math.pi
    f_lo = dist(lo) - d_init
    f_hi = dist(hi) - d_init
    if f_lo > 0.0 or f_hi < 0.0:
        raise Unreachable(
            f"no eastward longitude at range {d_init} m (attainable [{f_lo + d_init}, {f_hi + d_init}])")
    while (hi - lo) * sphere_radius > 0.25 * tol:
        mid = 0.5 * (lo + hi)
        if dist(mid) < d_init:
            lo = mid
        else:
            hi = mid
    dlon = 0.5 * (lo + hi)
    return GeoPosition(EARTH_RADIUS + target_altitude, wrap_pi(init.theta + dlon), target_lat)
