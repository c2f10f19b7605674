"""Command pipeline from raw policy action to the actuator-lag input.

Raw two-element actions are clipped to [-1, 1] and scaled to rate limits,
then degraded by a per-episode multiplicative failure bias (a stuck or
weakened actuator, sampled once at reset) and per-step additive Gaussian
noise. The output feeds the first-order lag states integrated by dynamics.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np

DSIGMA_MAX = math.radians(10.0)  # bank rate limit, rad/s
DALPHA_MAX = math.radians(4.0)   # AoA rate limit, rad/s


class ActuationParams(NamedTuple):
    dsigma_max: float = DSIGMA_MAX
    dalpha_max: float = DALPHA_MAX
    sigma_ctrl: float = 0.05 * DALPHA_MAX  # noise std, rad/s, both channels
    eps_ctrl: tuple = (-0.3, 0.0)          # failure bias bounds
    p_fail: float = 0.5
    tau_ctrl: Optional[float] = 1.0        # s; None disables lag


NOMINAL_ACTUATION = ActuationParams()
IDEAL_ACTUATION = ActuationParams(sigma_ctrl=0.0, p_fail=0.0)


class FailureState(NamedTuple):
    failed: bool
    bias: float  # multiplier offset; 0 when healthy


NO_FAILURE = FailureState(False, 0.0)


def scale_commands(u, params: ActuationParams = NOMINAL_ACTUATION) -> tuple:
    """(dsigma_cmd, dalpha_cmd) in rad/s from a raw 2-vector action."""
    u0 = max(-1.0, min(1.0, float(u[0])))
    u1 = max(-1.0, min(1.0, float(u[1])))
    return params.dsigma_max * u0, params.dalpha_max * u1


def sample_failure(rng: np.random.Generator,
                   params: ActuationParams = NOMINAL_ACTUATION) -> FailureState:
    """Draw the episode's failure state: biased with probability p_fail."""
    if params.p_fail > 0.0 and rng.uniform() < params.p_fail:
        return FailureState(True, rng.uniform(params.eps_ctrl[0], params.eps_ctrl[1]))
    return NO_FAILURE


def apply_failure_noise(cmds: tuple, failure: FailureState, rng: np.random.Generator,
                        params: ActuationParams = NOMINAL_ACTUATION) -> tuple:
    """Degrade commands by the episode bias, then add per-step Gaussian noise."""
    ds, da = cmds
    if failure.failed:
        gain = 1.0 + failure.bias
        ds *= gain
        da *= gain
    if params.sigma_ctrl > 0.0:
        ds += params.sigma_ctrl * rng.standard_normal()
        da += params.sigma_ctrl * rng.standard_normal()
    return ds, da
