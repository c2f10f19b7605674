"""Equations of motion, integrator order, constraints, and aero model."""

import math

import numpy as np
import pytest

from glidelab.dynamics import (
    ALPHA_MAX,
    DT_NOMINAL,
    EARTH,
    EARTH_NONROTATING,
    MU_EARTH,
    NOMINAL_AERO,
    SIGMA_LIMIT,
    AeroModel,
    PoleSingularity,
    VehicleState,
    VerticalFlightSingularity,
    aero_coefficients,
    atmosphere_density,
    path_constraints,
    rk4_step,
    state_derivative,
    wall_temperature,
)
from glidelab.geodesy import EARTH_RADIUS, GeoPosition
from glidelab.guidance import VelocityTriple

ENTRY = VehicleState(GeoPosition(EARTH_RADIUS + 60.0e3, 0.1, 0.05),
                     VelocityTriple(6500.0, math.radians(-1.0), 0.3),
                     math.radians(20.0), math.radians(30.0), 0.0, 0.0, 0.0)

VACUUM = AeroModel()._replace(rho_scale=0.0)


def _integrate(state, cmd, dt, t_end, aero=NOMINAL_AERO, planet=EARTH):
    n = round(t_end / dt)
    for _ in range(n):
        state = rk4_step(state, cmd, dt, aero, planet, None)
    return state


def test_atmosphere_density_surface_and_scale_height():
    assert atmosphere_density(0.0) == 1.225
    assert atmosphere_density(7018.00344) == pytest.approx(1.225 / math.e, rel=1e-9)
    thin = AeroModel()._replace(rho_scale=0.97)
    assert atmosphere_density(0.0, thin) == pytest.approx(0.97 * 1.225)


def test_aero_coefficients_nominal_polynomials():
    cl, cd = aero_coefficients(40.0)
    cl_hand = -0.041065 + 0.016292 * 40.0 + 0.0002602 * 40.0 ** 2
    cd_hand = 0.080505 - 0.03026 * cl_hand + 0.86495 * cl_hand ** 2
    assert cl == pytest.approx(cl_hand, rel=1e-12)
    assert cd == pytest.approx(cd_hand, rel=1e-12)


def test_aero_scale_factors_are_independent():
    # C_D's polynomial sees the unscaled C_L, so the scales multiply through
    perturbed = AeroModel()._replace(cl_scale=1.03, cd_scale=0.97)
    cl0, cd0 = aero_coefficients(25.0)
    cl, cd = aero_coefficients(25.0, perturbed)
    assert cl == pytest.approx(1.03 * cl0, rel=1e-12)
    assert cd == pytest.approx(0.97 * cd0, rel=1e-12)


def test_rk4_fourth_order_convergence():
    cmd = (math.radians(2.0), math.radians(-1.0))
    ref = _integrate(ENTRY, cmd, DT_NOMINAL / 100.0, 20.0)
    coarse = _integrate(ENTRY, cmd, DT_NOMINAL, 20.0)
    fine = _integrate(ENTRY, cmd, DT_NOMINAL / 2.0, 20.0)
    ref_a, coarse_a, fine_a = (np.array(s.to_array()[:8])
                               for s in (ref, coarse, fine))
    scale = np.array([EARTH_RADIUS, 1.0, 1.0, 7000.0, 1.0, 1.0, 1.0, 1.0])
    e_coarse = np.linalg.norm((coarse_a - ref_a) / scale)
    e_fine = np.linalg.norm((fine_a - ref_a) / scale)
    ratio = e_coarse / e_fine
    assert 14.0 <= ratio <= 18.0


def test_vacuum_energy_conservation():
    # no atmosphere, nonrotating planet: specific orbital energy is conserved
    state = VehicleState(GeoPosition(EARTH_RADIUS + 120.0e3, 0.0, 0.2),
                         VelocityTriple(7600.0, math.radians(-0.8), 0.7),
                         0.0, math.radians(10.0), 0.0, 0.0, 0.0)

    def energy(s: VehicleState) -> float:
        return 0.5 * s.vel.speed ** 2 - MU_EARTH / s.pos.radius

    e0 = energy(state)
    state = _integrate(state, (0.0, 0.0), 1.0, 500.0, aero=VACUUM,
                       planet=EARTH_NONROTATING)
    assert abs(energy(state) - e0) / abs(e0) < 1e-6


def test_open_loop_skip_glide_has_multiple_altitude_maxima():
    # near-max-L/D entry at interface porpoises before settling into the glide
    state = VehicleState(GeoPosition(EARTH_RADIUS + 100.0e3, 0.0, 0.0),
                         VelocityTriple(7450.0, math.radians(-2.0), 0.0),
                         0.0, math.radians(15.0), 0.0, 0.0, 0.0)
    alts = [state.pos.altitude]
    for _ in range(3000):
        state = rk4_step(state, (0.0, 0.0), 1.0, NOMINAL_AERO, EARTH, None)
        alts.append(state.pos.altitude)
        if state.pos.altitude < 15e3:
            break
    maxima = sum(1 for i in range(1, len(alts) - 1)
                 if alts[i] > alts[i - 1] and alts[i] > alts[i + 1])
    assert maxima >= 2


def test_wall_temperature_at_heat_limit():
    assert wall_temperature(3000.0e3) == pytest.approx(2808.0, abs=1.0)


def test_path_constraints_formulas():
    s = ENTRY
    status = path_constraints(s)
    rho = atmosphere_density(s.pos.altitude)
    assert status.dyn_pressure == pytest.approx(0.5 * rho * s.vel.speed ** 2,
                                                rel=1e-12)
    assert status.heat_rate == pytest.approx(
        1.65e-4 * math.sqrt(rho) * s.vel.speed ** 3.13, rel=1e-12)
    assert not status.any_violated
    fast = VehicleState(GeoPosition(EARTH_RADIUS + 20.0e3, 0.0, 0.0),
                        VelocityTriple(7000.0, 0.0, 0.0), 0.0,
                        math.radians(40.0), 0.0, 0.0, 0.0)
    assert path_constraints(fast).any_violated


def test_rk4_clips_attitude_to_limits():
    state = ENTRY._replace(sigma=SIGMA_LIMIT - 0.01, alpha=ALPHA_MAX - 0.001)
    cmd = (math.radians(10.0), math.radians(4.0))  # both rails
    for _ in range(10):
        state = rk4_step(state, cmd, 1.0, NOMINAL_AERO, EARTH, None)
    assert state.sigma == SIGMA_LIMIT
    assert state.alpha == ALPHA_MAX


def test_actuator_lag_first_order_response():
    # applied rate relaxes toward the command as 1 - exp(-t/tau)
    tau = 1.0
    state = ENTRY._replace(dsigma_lag=0.0, dalpha_lag=0.0)
    cmd = (math.radians(5.0), math.radians(2.0))
    for _ in range(100):
        state = rk4_step(state, cmd, 0.01, NOMINAL_AERO, EARTH, tau)
    expect = 1.0 - math.exp(-1.0 / tau)
    assert state.dsigma_lag == pytest.approx(cmd[0] * expect, rel=1e-6)
    assert state.dalpha_lag == pytest.approx(cmd[1] * expect, rel=1e-6)
    # lag disabled: applied rate is the command itself
    direct = rk4_step(ENTRY, cmd, 1.0, NOMINAL_AERO, EARTH, None)
    assert direct.dsigma_lag == cmd[0]
    assert direct.dalpha_lag == cmd[1]


def test_singularities_raise():
    vertical = ENTRY._replace(vel=VelocityTriple(7000.0, math.pi / 2.0, 0.0))
    with pytest.raises(VerticalFlightSingularity):
        state_derivative(vertical, (0.0, 0.0))
    polar = ENTRY._replace(pos=GeoPosition(EARTH_RADIUS + 50e3, 0.0, math.pi / 2.0))
    with pytest.raises(PoleSingularity):
        state_derivative(polar, (0.0, 0.0))


def test_rotating_terms_change_the_motion():
    cmd = (0.0, 0.0)
    rotating = _integrate(ENTRY, cmd, 1.0, 60.0, planet=EARTH)
    inertial = _integrate(ENTRY, cmd, 1.0, 60.0, planet=EARTH_NONROTATING)
    assert rotating.vel.heading != pytest.approx(inertial.vel.heading, abs=1e-7)
