"""Episodic glide-to-target environment.

Each episode draws initial conditions, a target, model perturbations, an
actuator failure state, and sensor scale factors from the scenario's ranges,
then steps the simulator one guidance period (default 5 s) per action. The
agent observes the velocity-field tracking error plus range, speed, heading
error, altitude error, and the current attitude angles, all multiplied by
fixed per-episode sensor scale factors. Episodes end on altitude floor,
flyby (heading error past 90 deg), constraint violation (when enforcement is
on), or a step limit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import actuation as act
from .dynamics import (
    ALPHA_MAX,
    DEFAULT_LIMITS,
    EARTH,
    MASS,
    S_REF,
    TERMINAL_REFINE_DISTANCE,
    TERMINAL_REFINEMENT,
    AeroModel,
    VehicleState,
    path_constraints,
    rk4_step,
)
from .geodesy import (
    EARTH_RADIUS,
    DegenerateArc,
    GeoPosition,
    haversine_distance,
    local_east_north,
    place_target,
    to_unit_sphere,
    wrap_pi,
)
from .guidance import (
    ReferenceField,
    SpeedProfile,
    VelocityTriple,
    ZeroRange,
    evaluate_field,
    reference_heading,
)
from .scenarios import ScenarioConfig

OBS_DIM = 9
ACT_DIM = 2

ALTITUDE_FLOOR = 10.0e3      # m
FLYBY_HEADING_ERR = math.pi / 2.0

SHAPING_GAIN = 1.0
CTRL_WEIGHT = 0.1
TERMINAL_BONUS = 20.0
MISS_LIMIT = 1000.0          # m, bonus and success gate
ALT_ERR_LIMIT = 1000.0       # m
SIGMA_V_FRACTION = 0.1       # shaping tolerance relative to current speed


class EpisodeError(RuntimeError):
    pass


class SteppedAfterDone(EpisodeError):
    pass


class NotDone(EpisodeError):
    pass


class TerminationReason(enum.Enum):
    FLYBY = "Flyby"
    ALTITUDE_FLOOR = "AltitudeFloor"
    CONSTRAINT_VIOLATION = "ConstraintViolation"
    STEP_LIMIT = "StepLimit"


class RewardBreakdown(NamedTuple):
    r_shaping: float
    r_ctrl: float
    r_bonus: float

    @property
    def total(self) -> float:
        return self.r_shaping + self.r_ctrl + self.r_bonus


@dataclass
class EpisodeState:
    vehicle: VehicleState
    target: GeoPosition
    aero: AeroModel
    failure: act.FailureState
    obs_scale: np.ndarray          # (9,) per-episode sensor multipliers
    profile: SpeedProfile
    field: ReferenceField          # cached at the current vehicle state
    done: bool = False
    reason: Optional[TerminationReason] = None
    steps: int = 0
    refined: bool = False          # terminal dt refinement latch
    diverted: bool = False
    qdot_peak: float = 0.0
    q_peak: float = 0.0
    n_peak: float = 0.0
    trace: Optional[list] = None   # per-substep (t, 8 states, cmd) rows


def reset(scenario: ScenarioConfig, rng: np.random.Generator,
          record_trace: bool = False) -> tuple:
    """Sample a fresh episode; returns (EpisodeState, Observation)."""
    lon = scenario.lon_init.sample(rng)
    lat = scenario.lat_init.sample(rng)
    h = scenario.h_init.sample(rng)
    v = scenario.v_init.sample(rng)
    gamma = scenario.gamma_init.sample(rng)
    lat_targ = scenario.lat_targ.sample(rng)
    heading_err = scenario.heading_err_init.sample(rng)

    pos = GeoPosition(EARTH_RADIUS + h, lon, lat)
    target = place_target(pos, lat_targ, scenario.d_init,
                          target_altitude=scenario.h_targ)

    def scale(var: float) -> float:
        return 1.0 + rng.uniform(-var, var) if var > 0.0 else 1.0

    aero = AeroModel(
        cl_scale=scale(scenario.cl_var),
        cd_scale=scale(scenario.cd_var),
        rho_scale=scale(scenario.rho_var),
        mass=MASS * scale(scenario.mass_area_var),
        s_ref=S_REF * scale(scenario.mass_area_var),
    )
    failure = act.sample_failure(rng, scenario.actuation)
    if scenario.eps_obs > 0.0:
        obs_scale = 1.0 + rng.uniform(-scenario.eps_obs, scenario.eps_obs, OBS_DIM)
    else:
        obs_scale = np.ones(OBS_DIM)

    profile = SpeedProfile.for_range(scenario.d_init, v, scenario.v_targ)
    psi = wrap_pi(reference_heading(pos, target, v) + heading_err)
    vehicle = VehicleState(pos, VelocityTriple(v, gamma, psi),
                           sigma=0.0, alpha=ALPHA_MAX,
                           dsigma_lag=0.0, dalpha_lag=0.0, t=0.0)
    ref = evaluate_field(pos, vehicle.vel, target, profile)
    ep = EpisodeState(vehicle=vehicle, target=target, aero=aero, failure=failure,
                      obs_scale=obs_scale, profile=profile, field=ref,
                      trace=[] if record_trace else None)
    if record_trace:
        _trace_row(ep, (0.0, 0.0))
    return ep, observe(ep)


def _trace_row(ep: EpisodeState, cmd: tuple) -> None:
    s = ep.vehicle
    ep.trace.append((s.t,) + tuple(s.pos) + tuple(s.vel)
                    + (s.sigma, s.alpha) + tuple(cmd))


def observe(ep: EpisodeState) -> np.ndarray:
    """Sensor-scaled 9-vector [v_err(3), d, V, psi_err, h_err, alpha, sigma]."""
    s = ep.vehicle
    f = ep.field
    o = np.empty(OBS_DIM)
    o[0:3] = f.v_err_cartesian
    o[3] = f.d
    o[4] = s.vel.speed
    o[5] = f.psi_err
    o[6] = (s.pos.radius - EARTH_RADIUS) - ep.target.altitude
    o[7] = s.alpha
    o[8] = s.sigma
    return o * ep.obs_scale


def reward(ep: EpisodeState, cmds: tuple, scenario: ScenarioConfig,
           done: bool) -> RewardBreakdown:
    """Shaping + control penalty + terminal bonus for the just-completed step."""
    v_err = ep.field.v_err_cartesian
    sigma_v = SIGMA_V_FRACTION * ep.vehicle.vel.speed
    r_shaping = SHAPING_GAIN * math.exp(-float(v_err @ v_err) / (sigma_v * sigma_v))
    p = scenario.actuation
    r_ctrl = -CTRL_WEIGHT * math.hypot(cmds[0] / p.dsigma_max, cmds[1] / p.dalpha_max)
    r_bonus = 0.0
    if done:
        miss, alt_err, _ = terminal_metrics(ep, check_done=False)
        if miss < MISS_LIMIT and abs(alt_err) < ALT_ERR_LIMIT:
            r_bonus = TERMINAL_BONUS
    return RewardBreakdown(r_shaping, r_ctrl, r_bonus)


def step(ep: EpisodeState, action, scenario: ScenarioConfig,
         rng: np.random.Generator) -> tuple:
    """Advance one guidance period; returns (obs, reward, done, info)."""
    if ep.done:
        raise SteppedAfterDone("episode already terminated")
    params = scenario.actuation
    ds_cmd, da_cmd = act.scale_commands(action, params)
    if ep.vehicle.vel.speed > scenario.alpha_hold_speed:
        da_cmd = 0.0  # AoA pinned during the high-speed hold phase
    cmd = act.apply_failure_noise((ds_cmd, da_cmd), ep.failure, rng, params)

    limits = DEFAULT_LIMITS
    t_end = ep.vehicle.t + scenario.guidance_period
    while not ep.done and t_end - ep.vehicle.t > 1e-9:
        if (scenario.divert is not None and not ep.diverted
                and ep.vehicle.t >= scenario.divert.time):
            d = scenario.divert.delta
            ep.target = GeoPosition(ep.target.radius,
                                    wrap_pi(ep.target.theta + rng.uniform(-d, d)),
                                    ep.target.phi + rng.uniform(-d, d))
            ep.diverted = True
        dt = scenario.dt / TERMINAL_REFINEMENT if ep.refined else scenario.dt
        remaining = t_end - ep.vehicle.t
        if remaining < dt:
            dt = remaining
        ep.vehicle = rk4_step(ep.vehicle, cmd, dt, ep.aero, EARTH, params.tau_ctrl)
        if ep.trace is not None:
            _trace_row(ep, cmd)
        try:
            ep.field = evaluate_field(ep.vehicle.pos, ep.vehicle.vel,
                                      ep.target, ep.profile)
        except (DegenerateArc, ZeroRange):
            # Exactly over the target: the heading reference is undefined and
            # this substep is the closest approach.
            ep.field = ep.field._replace(d=0.0, psi_err=math.pi)
        if not ep.refined and ep.field.d < TERMINAL_REFINE_DISTANCE:
            ep.refined = True
        status = path_constraints(ep.vehicle, ep.aero, EARTH, limits)
        if status.heat_rate > ep.qdot_peak:
            ep.qdot_peak = status.heat_rate
        if status.dyn_pressure > ep.q_peak:
            ep.q_peak = status.dyn_pressure
        if status.load > ep.n_peak:
            ep.n_peak = status.load
        if ep.vehicle.pos.radius - EARTH_RADIUS < ALTITUDE_FLOOR:
            ep.done, ep.reason = True, TerminationReason.ALTITUDE_FLOOR
        elif abs(ep.field.psi_err) > FLYBY_HEADING_ERR:
            ep.done, ep.reason = True, TerminationReason.FLYBY
        elif scenario.constraint_enforcement and status.any_violated:
            ep.done, ep.reason = True, TerminationReason.CONSTRAINT_VIOLATION

    ep.steps += 1
    if not ep.done and ep.steps >= scenario.max_steps:
        ep.done, ep.reason = True, TerminationReason.STEP_LIMIT

    breakdown = reward(ep, (ds_cmd, da_cmd), scenario, ep.done)
    info = {"reward_breakdown": breakdown, "cmd": cmd,
            "constraint_peaks": (ep.qdot_peak, ep.q_peak, ep.n_peak)}
    if ep.done:
        info["reason"] = ep.reason
        info["terminal_metrics"] = terminal_metrics(ep, check_done=False)
    return observe(ep), breakdown.total, ep.done, info


def terminal_metrics(ep: EpisodeState, check_done: bool = True) -> tuple:
    """(miss m, alt_err m, speed_err m/s) at the episode's final state.

    Miss is the great-circle distance at the target-altitude radius between
    the final vehicle longitude/latitude and the target's.
    """
    if check_done and not ep.done:
        raise NotDone("episode still running")
    s = ep.vehicle
    radius = EARTH_RADIUS + ep.target.altitude
    miss = haversine_distance(s.pos, ep.target, radius)
    alt_err = (s.pos.radius - EARTH_RADIUS) - ep.target.altitude
    speed_err = s.vel.speed - ep.profile.v_targ
    return miss, alt_err, speed_err


def ned_miss(ep: EpisodeState) -> tuple:
    """(north, east) components in meters of the terminal miss about the target."""
    if not ep.done:
        raise NotDone("episode still running")
    r_t = to_unit_sphere(ep.target)
    r_v = to_unit_sphere(ep.vehicle.pos)
    east, north = local_east_north(r_t)
    radius = EARTH_RADIUS + ep.target.altitude
    delta = r_v - r_t
    return radius * float(delta @ north), radius * float(delta @ east)


class GlideEnv:
    """Stateful wrapper bundling a scenario and an rng stream."""

    def __init__(self, scenario: ScenarioConfig, rng: np.random.Generator):
        self.scenario = scenario
        self.rng = rng
        self.ep: Optional[EpisodeState] = None
        self.obs_dim = OBS_DIM
        self.act_dim = ACT_DIM

    def reset(self, record_trace: bool = False) -> np.ndarray:
        self.ep, obs = reset(self.scenario, self.rng, record_trace)
        return obs

    def step(self, action) -> tuple:
        return step(self.ep, action, self.scenario, self.rng)
