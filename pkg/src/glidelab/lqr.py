"""Time-varying LQR tracking of a recorded reference trajectory.

The tracker linearizes a nondimensionalized copy of the glide dynamics about
a reference trajectory (recorded from a closed-loop episode under nominal
conditions), propagates the matrix Riccati equation backward from a terminal
weight, and schedules feedback gains on the guidance-period grid. Tracking
applies interpolated gains to the scaled state deviation on top of the
recorded zero-order-hold reference controls. Lengths scale by the Earth
radius, speeds by the circular orbit speed, and time by their ratio; angles
are unscaled. The 8-dimensional state is [R, theta, phi, V, gamma, psi,
sigma, alpha] with actuator lag disabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .actuation import DALPHA_MAX, DSIGMA_MAX
from .dynamics import EARTH, NOMINAL_AERO, _derivatives
from .environment import EpisodeState, GlideEnv
from .geodesy import wrap_pi
from .scenarios import ScenarioConfig

G0 = EARTH.mu / (EARTH.radius * EARTH.radius)   # m/s^2 at the surface radius
SPEED_UNIT = math.sqrt(G0 * EARTH.radius)       # m/s
TIME_UNIT = math.sqrt(EARTH.radius / G0)        # s

STATE_SCALE = np.array([1.0 / EARTH.radius, 1.0, 1.0, 1.0 / SPEED_UNIT,
                        1.0, 1.0, 1.0, 1.0])
WRAPPED_STATES = (1, 5, 6)  # theta, psi, sigma deltas wrap to (-pi, pi]

GAIN_PERIOD = 5.0           # s, one gain per guidance period
RICCATI_SUBSTEPS = 20       # RK4 substeps per grid interval

REFERENCE_COLUMNS = ("t", "R", "theta", "phi", "V", "gamma", "psi", "sigma",
                     "alpha", "dsigma_cmd", "dalpha_cmd")


class LqrError(RuntimeError):
    pass


class RiccatiBlowup(LqrError):
    pass


class OutOfSpan(LqrError):
    pass


class ReferenceIncomplete(LqrError):
    pass


class LqrWeights(NamedTuple):
    p_tf: np.ndarray
    q: np.ndarray
    r: np.ndarray

    @staticmethod
    def default() -> "LqrWeights":
        diag = np.array([1.0e4, 1.0e6, 1.0e6, 1.0e4, 1.0, 1.0, 1.0, 1.0])
        return LqrWeights(np.diag(diag), np.diag(diag), np.eye(2))


def scale_state(x: np.ndarray) -> np.ndarray:
    return x * STATE_SCALE


def scaled_derivative(x_s: np.ndarray, u_s: np.ndarray) -> np.ndarray:
    """Nondimensional 8-state dynamics with nominal aero, lag disabled."""
    x = x_s / STATE_SCALE
    u = u_s / TIME_UNIT
    d = _derivatives(tuple(x) + (0.0, 0.0), u[0], u[1],
                     NOMINAL_AERO, EARTH, None)
    return np.asarray(d[:8]) * STATE_SCALE * TIME_UNIT


# Rate-valued lag states scale by the time unit, making them dimensionless.
STATE_SCALE_LAG = np.concatenate([STATE_SCALE, [TIME_UNIT, TIME_UNIT]])


def scaled_dynamics(tau_ctrl: Optional[float] = None):
    """Scaled-model derivative function; 10-state when actuator lag is on."""
    if tau_ctrl is None:
        return scaled_derivative

    def with_lag(x_s: np.ndarray, u_s: np.ndarray) -> np.ndarray:
        x = x_s / STATE_SCALE_LAG
        u = u_s / TIME_UNIT
        d = _derivatives(tuple(x), u[0], u[1], NOMINAL_AERO, EARTH, tau_ctrl)
        return np.asarray(d) * STATE_SCALE_LAG * TIME_UNIT

    return with_lag


def linearize(x_ref: np.ndarray, u_ref: np.ndarray,
              dynamics=scaled_derivative) -> tuple:
    """Central-difference Jacobians (A, B) of scaled dynamics at a point."""
    n, m = len(x_ref), len(u_ref)
    a = np.empty((n, n))
    b = np.empty((n, m))
    for i in range(n):
        step = 1e-6 * max(1.0, abs(x_ref[i]))
        xp, xm = x_ref.copy(), x_ref.copy()
        xp[i] += step
        xm[i] -= step
        a[:, i] = (dynamics(xp, u_ref) - dynamics(xm, u_ref)) / (2.0 * step)
    for j in range(m):
        step = 1e-6 * max(1.0, abs(u_ref[j]))
        up, um = u_ref.copy(), u_ref.copy()
        up[j] += step
        um[j] -= step
        b[:, j] = (dynamics(x_ref, up) - dynamics(x_ref, um)) / (2.0 * step)
    return a, b


@dataclass
class ReferenceTrajectory:
    times: np.ndarray     # (n,) s, strictly increasing
    states: np.ndarray    # (n, 8) raw units
    controls: np.ndarray  # (n, 2) rad/s, zero-order hold from each node

    @staticmethod
    def from_trace(trace, period: float = GAIN_PERIOD) -> "ReferenceTrajectory":
        """Resample a per-substep episode trace onto the guidance grid."""
        rows = np.asarray(trace)
        t = rows[:, 0]
        t_f = t[-1]
        nodes = list(np.arange(0.0, t_f, period))
        if not nodes or t_f - nodes[-1] > 1e-9:
            nodes.append(t_f)
        nodes = np.asarray(nodes)
        states = np.column_stack([np.interp(nodes, t, rows[:, c])
                                  for c in range(1, 9)])
        # Each row's command was applied over the interval ending at its
        # timestamp; the command active AT a node is the next row's.
        idx = np.minimum(np.searchsorted(t, nodes + 1e-9, side="right"),
                         len(rows) - 1)
        controls = rows[idx][:, 9:11]
        return ReferenceTrajectory(nodes, states, controls)

    def state_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.states[:, c])
                         for c in range(8)])

    def control_at(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.times, t + 1e-9, side="right") - 1)
        return self.controls[max(0, min(k, len(self.times) - 1))]

    @property
    def span(self) -> tuple:
        return float(self.times[0]), float(self.times[-1])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\t".join(REFERENCE_COLUMNS) + "\n")
            for i, t in enumerate(self.times):
                vals = [t, *self.states[i], *self.controls[i]]
                fh.write("\t".join(repr(float(v)) for v in vals) + "\n")

    @staticmethod
    def load(path) -> "ReferenceTrajectory":
        data = np.loadtxt(path, skiprows=1)
        return ReferenceTrajectory(data[:, 0], data[:, 1:9], data[:, 9:11])


@dataclass
class GainSchedule:
    times: np.ndarray      # (n,) s
    gains: np.ndarray      # (n, 2, 8)
    costates: np.ndarray   # (n, 8, 8) Riccati solution at the nodes

    def gain_at(self, t: float) -> np.ndarray:
        times = self.times
        if t <= times[0]:
            return self.gains[0]
        if t >= times[-1]:
            return self.gains[-1]
        k = int(np.searchsorted(times, t, side="right") - 1)
        f = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - f) * self.gains[k] + f * self.gains[k + 1]

    def save(self, path) -> None:
        np.savez(path, version=1, times=self.times, gains=self.gains,
                 costates=self.costates)

    @staticmethod
    def load(path) -> "GainSchedule":
        data = np.load(path)
        if int(data["version"]) != 1:
            raise LqrError(f"unsupported gain file version {data['version']}")
        return GainSchedule(data["times"], data["gains"], data["costates"])


def _riccati_rhs(p: np.ndarray, a: np.ndarray, brb: np.ndarray,
                 q: np.ndarray) -> np.ndarray:
    # dP/ds in reverse time s = t_f - t.
    return a.T @ p + p @ a - p @ brb @ p + q


def riccati_backward(ref: ReferenceTrajectory,
                     weights: Optional[LqrWeights] = None,
                     substeps: int = RICCATI_SUBSTEPS) -> GainSchedule:
    """Propagate the Riccati equation backward along the reference."""
    w = weights or LqrWeights.default()
    r_inv = np.linalg.inv(w.r)
    n = len(ref.times)
    t_scaled = ref.times / TIME_UNIT

    ab = []
    for k in range(n):
        x_s = scale_state(ref.states[k])
        u_s = ref.controls[k] * TIME_UNIT
        ab.append(linearize(x_s, u_s))

    p = 0.5 * (w.p_tf + w.p_tf.T)
    costates = np.empty((n, 8, 8))
    costates[-1] = p
    for k in range(n - 2, -1, -1):
        a, b = ab[k]  # piecewise-constant over the interval ending at k+1
        brb = b @ r_inv @ b.T
        h = (t_scaled[k + 1] - t_scaled[k]) / substeps
        for _ in range(substeps):
            k1 = _riccati_rhs(p, a, brb, w.q)
            k2 = _riccati_rhs(p + 0.5 * h * k1, a, brb, w.q)
            k3 = _riccati_rhs(p + 0.5 * h * k2, a, brb, w.q)
            k4 = _riccati_rhs(p + h * k3, a, brb, w.q)
            p = p + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            p = 0.5 * (p + p.T)
            if not np.isfinite(p).all() or np.abs(p).max() > 1e12:
                raise RiccatiBlowup(f"Riccati diverged at node {k}")
        costates[k] = p

    gains = np.empty((n, 2, 8))
    for k in range(n):
        _, b = ab[k]
        gains[k] = r_inv @ b.T @ costates[k]
    return GainSchedule(ref.times.copy(), gains, costates)


def track(x_now: np.ndarray, t: float, schedule: GainSchedule,
          ref: ReferenceTrajectory) -> np.ndarray:
    """Stabilizing command u_c = u_ref - K(t) dx, clipped to rate limits."""
    t0, t_f = ref.span
    if t < t0 - 1e-9 or t > t_f + 1e-9:
        raise OutOfSpan(f"t={t} outside reference span [{t0}, {t_f}]")
    dx = scale_state(np.asarray(x_now)) - scale_state(ref.state_at(t))
    for i in WRAPPED_STATES:
        dx[i] = wrap_pi(dx[i])
    du = -(schedule.gain_at(t) @ dx) / TIME_UNIT
    u_c = ref.control_at(t) + du
    return np.array([max(-DSIGMA_MAX, min(DSIGMA_MAX, u_c[0])),
                     max(-DALPHA_MAX, min(DALPHA_MAX, u_c[1]))])


def generate_reference(scenario: ScenarioConfig, controller,
                       rng: np.random.Generator) -> tuple:
    """Record one closed-loop episode; returns (ReferenceTrajectory, metrics).

    The scenario should be deterministic (collapsed ranges) with actuator lag
    disabled so replaying the recorded commands reproduces the states.
    """
    env = GlideEnv(scenario, rng)
    obs = env.reset(record_trace=True)
    controller.reset()
    done = False
    info = {}
    while not done:
        obs, _, done, info = env.step(controller.act(obs, env.ep))
    miss, alt_err, speed_err = info["terminal_metrics"]
    if not (miss < 1000.0 and abs(alt_err) < 1000.0):
        raise ReferenceIncomplete(
            f"reference episode missed: miss={miss:.0f} m, "
            f"alt_err={alt_err:.0f} m")
    return (ReferenceTrajectory.from_trace(env.ep.trace),
            (miss, alt_err, speed_err))


class LqrController:
    """Campaign adapter: true-state feedback through the gain schedule.

    The tracker's commands are defined only on the reference span; episodes
    that outlast it hold the terminal gain/reference (time clamped).
    """

    def __init__(self, schedule: GainSchedule, ref: ReferenceTrajectory):
        self.schedule = schedule
        self.ref = ref

    def reset(self) -> None:
        pass

    def act(self, obs: np.ndarray, ep: EpisodeState) -> np.ndarray:
        s = ep.vehicle
        x = np.array([s.pos.radius, s.pos.theta, s.pos.phi, s.vel.speed,
                      s.vel.flight_path, s.vel.heading, s.sigma, s.alpha])
        t0, t_f = self.ref.span
        t = max(t0, min(t_f, s.t))
        u_c = track(x, t, self.schedule, self.ref)
        return np.array([u_c[0] / DSIGMA_MAX, u_c[1] / DALPHA_MAX])
