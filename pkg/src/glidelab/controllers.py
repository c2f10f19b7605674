"""Closed-loop controllers that map episode observations to raw actions.

All controllers return raw two-element actions in the normalized units the
environment expects (clipped to [-1, 1] and scaled to rate limits inside the
step pipeline). The field-tracking controller is a fixed-gain law used to
bootstrap reference trajectories; the policy controller wraps a trained
network checkpoint and runs it deterministically (mean action).
"""

from __future__ import annotations

import math
from typing import Optional, Protocol

import numpy as np

from .actuation import DALPHA_MAX, DSIGMA_MAX
from .dynamics import (
    ALPHA_MAX,
    EARTH,
    MASS,
    NOMINAL_AERO,
    S_REF,
    atmosphere_density,
)
from .environment import EpisodeState
from .geodesy import wrap_pi


class Controller(Protocol):
    def reset(self) -> None: ...

    def act(self, obs: np.ndarray, ep: EpisodeState) -> np.ndarray: ...


class ZeroController:
    """Open-loop glide: zero rate commands (bank stays 0, AoA stays held)."""

    def reset(self) -> None:
        pass

    def act(self, obs: np.ndarray, ep: EpisodeState) -> np.ndarray:
        return np.zeros(2)


class FieldTrackingController:
    """Proportional velocity-field tracker using the nominal vehicle model.

    Vertical channel demands the lift component that steers the flight path
    toward the field reference; lateral channel demands the turn rate that
    nulls the heading error; bank angle allocates lift between them and the
    angle of attack supplies the total. Overspeed relative to the reference
    adds bank to dump energy. Knows only nominal aerodynamics, not the
    episode's perturbed values.
    """

    def __init__(self, k_gamma: float = 0.05, k_psi: float = 0.025,
                 k_speed: float = 2.0, k_rate: float = 0.5,
                 max_bank: float = math.radians(85.0)):
        self.k_gamma = k_gamma  # 1/s, flight-path loop
        self.k_psi = k_psi      # 1/s, heading loop
        self.k_speed = k_speed  # rad of extra bank per unit overspeed fraction
        self.k_rate = k_rate    # 1/s, attitude rate loops
        self.max_bank = max_bank

    def reset(self) -> None:
        pass

    def act(self, obs: np.ndarray, ep: EpisodeState) -> np.ndarray:
        s = ep.vehicle
        f = ep.field
        v, gamma = s.vel.speed, s.vel.flight_path
        radius = s.pos.radius
        rho = atmosphere_density(radius - EARTH.radius)
        q_s = 0.5 * rho * v * v * S_REF

        g_eff = EARTH.mu / (radius * radius) - v * v / radius
        lift_vert = MASS * (g_eff * math.cos(gamma)
                            - v * self.k_gamma * f.gamma_err)
        lift_lat = -MASS * v * math.cos(gamma) * self.k_psi * f.psi_err

        bank = math.atan2(lift_lat, lift_vert)
        overspeed = max(0.0, (v - f.v_ref.speed) / max(f.v_ref.speed, 1.0))
        bank_mag = min(abs(bank) + self.k_speed * overspeed, self.max_bank)
        bank_cmd = math.copysign(bank_mag, bank) if bank != 0.0 else 0.0

        cl_need = math.hypot(lift_vert, lift_lat) / max(q_s, 1e-6)
        alpha_cmd = _alpha_for_cl(cl_need)

        u_sigma = self.k_rate * wrap_pi(bank_cmd - s.sigma) / DSIGMA_MAX
        u_alpha = self.k_rate * (alpha_cmd - s.alpha) / DALPHA_MAX
        return np.array([u_sigma, u_alpha])


def _alpha_for_cl(cl: float) -> float:
    """Angle of attack (rad) whose nominal lift coefficient is cl, clipped."""
    l0, l1, l2 = NOMINAL_AERO.cl_coeffs
    disc = l1 * l1 - 4.0 * l2 * (l0 - cl)
    if disc <= 0.0:
        return 0.0
    a_deg = (-l1 + math.sqrt(disc)) / (2.0 * l2)
    return min(max(math.radians(a_deg), 0.0), ALPHA_MAX)


class PolicyController:
    """Deterministic wrapper over a trained policy checkpoint."""

    def __init__(self, policy, normalizer):
        self.policy = policy
        self.normalizer = normalizer
        self.hidden: Optional[np.ndarray] = None

    @classmethod
    def from_checkpoint(cls, path) -> "PolicyController":
        from .ppo import load_checkpoint
        policy, _, normalizer, _ = load_checkpoint(path)
        return cls(policy, normalizer)

    def reset(self) -> None:
        self.hidden = self.policy.initial_hidden()

    def act(self, obs: np.ndarray, ep: EpisodeState) -> np.ndarray:
        if self.hidden is None:
            self.reset()
        mean, self.hidden = self.policy.step(self.normalizer.normalize(obs),
                                             self.hidden)
        return mean
