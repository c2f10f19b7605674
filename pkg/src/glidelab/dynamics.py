"""Point-mass glide dynamics over a rotating spherical Earth.

State is position in Earth-centered spherical coordinates (R, theta, phi),
velocity as an LVLH triple (V, gamma, psi), bank angle, angle of attack, and
two first-order actuator-lag states. Forces are drag-polar aerodynamics in an
exponential atmosphere plus inverse-square gravity; the rotating frame
contributes Coriolis (2*Omega) and centrifugal (Omega^2*R) accelerations.
Integration is classical RK4. Path constraints (heating rate, dynamic
pressure, load factor) are evaluated as pure functions of state.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .geodesy import EARTH_RADIUS, GeoPosition
from .guidance import VelocityTriple

OMEGA_EARTH = 7.292e-5        # rad/s
MU_EARTH = 3.986004418e14     # m^3/s^2
RHO_SEA_LEVEL = 1.225         # kg/m^3
SCALE_HEIGHT = 7018.00344     # m

MASS = 1043.05                # kg
S_REF = 3.9122                # m^2
CL_COEFFS = (-0.041065, 0.016292, 0.0002602)   # C_L(alpha_deg) polynomial
CD_COEFFS = (0.080505, -0.03026, 0.86495)      # C_D(C_L) polynomial

SIGMA_LIMIT = math.radians(150.0)   # |bank| hard limit
ALPHA_MIN = 0.0
ALPHA_MAX = math.radians(40.0)

QDOT_MAX = 3.0e6              # W/m^2
DYN_PRESSURE_MAX = 5.0e4      # Pa
LOAD_MAX = 68.7               # m/s^2 (7 g)

STEFAN_BOLTZMANN = 5.670374419e-8  # W/m^2/K^4
EMISSIVITY = 0.85

DT_NOMINAL = 1.0              # s
TERMINAL_REFINEMENT = 20      # dt divisor inside 10 km of target
TERMINAL_REFINE_DISTANCE = 10.0e3  # m


class DynamicsError(ValueError):
    pass


class VerticalFlightSingularity(DynamicsError):
    """Heading rate undefined at |gamma| = 90 deg."""


class PoleSingularity(DynamicsError):
    """Longitude rate undefined at the poles."""


class PlanetModel(NamedTuple):
    omega: float = OMEGA_EARTH    # rad/s
    mu: float = MU_EARTH          # m^3/s^2
    radius: float = EARTH_RADIUS  # m
    rho0: float = RHO_SEA_LEVEL   # kg/m^3
    h_s: float = SCALE_HEIGHT     # m


EARTH = PlanetModel()
EARTH_NONROTATING = PlanetModel(omega=0.0)


class AeroModel(NamedTuple):
    cl_coeffs: Sequence[float] = CL_COEFFS
    cd_coeffs: Sequence[float] = CD_COEFFS
    s_ref: float = S_REF          # m^2
    mass: float = MASS            # kg
    cl_scale: float = 1.0         # episode perturbation multipliers
    cd_scale: float = 1.0
    rho_scale: float = 1.0


NOMINAL_AERO = AeroModel()


class VehicleState(NamedTuple):
    pos: GeoPosition
    vel: VelocityTriple
    sigma: float        # bank angle, rad
    alpha: float        # angle of attack, rad
    dsigma_lag: float   # lagged bank rate, rad/s
    dalpha_lag: float   # lagged AoA rate, rad/s
    t: float            # s

    def to_array(self) -> np.ndarray:
        """Flat [R, theta, phi, V, gamma, psi, sigma, alpha, dsig, dalp]."""
        return np.array(self.pos + self.vel
                        + (self.sigma, self.alpha, self.dsigma_lag, self.dalpha_lag))

    @staticmethod
    def from_array(y: Sequence[float], t: float) -> "VehicleState":
        return VehicleState(GeoPosition(y[0], y[1], y[2]),
                            VelocityTriple(y[3], y[4], y[5]),
                            y[6], y[7], y[8], y[9], t)


class ConstraintStatus(NamedTuple):
    heat_rate: float      # W/m^2
    dyn_pressure: float   # Pa
    load: float           # m/s^2
    violated: tuple       # (heat, pressure, load) flags

    @property
    def any_violated(self) -> bool:
        return any(self.violated)


class ConstraintLimits(NamedTuple):
    heat_rate: float = QDOT_MAX
    dyn_pressure: float = DYN_PRESSURE_MAX
    load: float = LOAD_MAX


DEFAULT_LIMITS = ConstraintLimits()


def atmosphere_density(altitude: float, aero: AeroModel = NOMINAL_AERO,
                       planet: PlanetModel = EARTH) -> float:
    """Exponential density at altitude, scaled by the episode perturbation."""
    return aero.rho_scale * planet.rho0 * math.exp(-altitude / planet.h_s)


def aero_coefficients(alpha_deg: float, aero: AeroModel = NOMINAL_AERO) -> tuple:
    """(C_L, C_D) at angle of attack in degrees, with episode scales applied.

    C_D's polynomial takes the unscaled C_L so the two perturbations stay
    independent multipliers on the final coefficients.
    """
    l0, l1, l2 = aero.cl_coeffs
    cl = l0 + l1 * alpha_deg + l2 * alpha_deg * alpha_deg
    d0, d1, d2 = aero.cd_coeffs
    cd = d0 + d1 * cl + d2 * cl * cl
    return aero.cl_scale * cl, aero.cd_scale * cd


def aero_forces(state: VehicleState, aero: AeroModel = NOMINAL_AERO,
                planet: PlanetModel = EARTH) -> tuple:
    """(lift, drag) in newtons at the current state."""
    rho = atmosphere_density(state.pos.radius - planet.radius, aero, planet)
    cl, cd = aero_coefficients(math.degrees(state.alpha), aero)
    q_s = 0.5 * rho * state.vel.speed ** 2 * aero.s_ref
    return q_s * cl, q_s * cd


def _derivatives(y: tuple, dsigma_af: float, dalpha_af: float, aero: AeroModel,
                 planet: PlanetModel, tau_ctrl: Optional[float]) -> tuple:
    """Time derivative of the flat state tuple. Hot path: scalar math only."""
    R, theta, phi, V, gamma, psi, sigma, alpha, dsig, dalp = y

    sg, cg = math.sin(gamma), math.cos(gamma)
    sp, cp = math.sin(psi), math.cos(psi)
    sf, cf = math.sin(phi), math.cos(phi)
    if abs(cg) < 1e-6:
        raise VerticalFlightSingularity(f"|gamma| at 90 deg (gamma={gamma})")
    if abs(cf) < 1e-6:
        raise PoleSingularity(f"latitude at pole (phi={phi})")

    h = R - planet.radius
    rho = aero.rho_scale * planet.rho0 * math.exp(-h / planet.h_s)
    l0, l1, l2 = aero.cl_coeffs
    a_deg = math.degrees(alpha)
    cl = l0 + l1 * a_deg + l2 * a_deg * a_deg
    d0, d1, d2 = aero.cd_coeffs
    cd = aero.cd_scale * (d0 + d1 * cl + d2 * cl * cl)
    cl *= aero.cl_scale
    q_s = 0.5 * rho * V * V * aero.s_ref
    lift, drag = q_s * cl, q_s * cd

    g = planet.mu / (R * R)
    m = aero.mass
    om = planet.omega
    om2R = om * om * R

    dR = V * sg
    dtheta = V * cg * cp / (R * cf)
    dphi = V * cg * sp / R

    dV = -drag / m - g * sg + om2R * cf * (sg * cf - cg * sf * sp)
    dgamma = (lift * math.cos(sigma) / m - g * cg + V * V / R * cg
              + 2.0 * om * V * cf * cp
              + om2R * cf * (cg * cf + sg * sf * sp)) / V
    dpsi = (lift * math.sin(sigma) / (m * cg) - V * V / R * cg * cp * (sf / cf)
            + 2.0 * om * V * ((sg / cg) * cf * sp - sf)
            + om2R * sf * cf * cp / cg) / V

    if tau_ctrl is None:
        # Lag disabled: commands act directly, lag states are inert mirrors.
        return (dR, dtheta, dphi, dV, dgamma, dpsi, dsigma_af, dalpha_af, 0.0, 0.0)
    return (dR, dtheta, dphi, dV, dgamma, dpsi, dsig, dalp,
            (dsigma_af - dsig) / tau_ctrl, (dalpha_af - dalp) / tau_ctrl)


def state_derivative(state: VehicleState, cmd: tuple, aero: AeroModel = NOMINAL_AERO,
                     planet: PlanetModel = EARTH,
                     tau_ctrl: Optional[float] = 1.0) -> VehicleState:
    """Derivative of every VehicleState field (t slot carries dt/dt = 1)."""
    y = state.pos + state.vel + (state.sigma, state.alpha,
                                 state.dsigma_lag, state.dalpha_lag)
    d = _derivatives(y, cmd[0], cmd[1], aero, planet, tau_ctrl)
    return VehicleState.from_array(d, 1.0)


def rk4_step(state: VehicleState, cmd: tuple, dt: float,
             aero: AeroModel = NOMINAL_AERO, planet: PlanetModel = EARTH,
             tau_ctrl: Optional[float] = 1.0) -> VehicleState:
    """One classical RK4 step; alpha and sigma clipped to hard limits after."""
    y0 = state.pos + state.vel + (state.sigma, state.alpha,
                                  state.dsigma_lag, state.dalpha_lag)
    ds, da = cmd
    half = 0.5 * dt
    k1 = _derivatives(y0, ds, da, aero, planet, tau_ctrl)
    y1 = tuple(a + half * b for a, b in zip(y0, k1))
    k2 = _derivatives(y1, ds, da, aero, planet, tau_ctrl)
    y2 = tuple(a + half * b for a, b in zip(y0, k2))
    k3 = _derivatives(y2, ds, da, aero, planet, tau_ctrl)
    y3 = tuple(a + dt * b for a, b in zip(y0, k3))
    k4 = _derivatives(y3, ds, da, aero, planet, tau_ctrl)
    sixth = dt / 6.0
    y = [a + sixth * (b + 2.0 * (c + d) + e)
         for a, b, c, d, e in zip(y0, k1, k2, k3, k4)]

    y[6] = max(-SIGMA_LIMIT, min(SIGMA_LIMIT, y[6]))
    y[7] = max(ALPHA_MIN, min(ALPHA_MAX, y[7]))
    if tau_ctrl is None:
        y[8], y[9] = ds, da
    return VehicleState(GeoPosition(y[0], y[1], y[2]),
                        VelocityTriple(y[3], y[4], y[5]),
                        y[6], y[7], y[8], y[9], state.t + dt)


def path_constraints(state: VehicleState, aero: AeroModel = NOMINAL_AERO,
                     planet: PlanetModel = EARTH,
                     limits: ConstraintLimits = DEFAULT_LIMITS) -> ConstraintStatus:
    """Heating rate (W/m^2), dynamic pressure (Pa), load factor (m/s^2)."""
    rho = atmosphere_density(state.pos.radius - planet.radius, aero, planet)
    v = state.vel.speed
    qdot = 1.65e-4 * math.sqrt(rho) * v ** 3.13
    q = 0.5 * rho * v * v
    lift, drag = aero_forces(state, aero, planet)
    n = math.hypot(lift, drag) / aero.mass
    return ConstraintStatus(qdot, q, n,
                            (qdot > limits.heat_rate,
                             q > limits.dyn_pressure,
                             n > limits.load))


def wall_temperature(qdot: float, emissivity: float = EMISSIVITY) -> float:
    """Radiative-equilibrium wall temperature in kelvin for a heat flux in W/m^2."""
    return (qdot / (emissivity * STEFAN_BOLTZMANN)) ** 0.25
