"""Hypersonic glide guidance laboratory.

A 3-DOF rotating spherical-Earth entry simulator, a curved-space velocity
field that steers glides toward a target state, a recurrent policy trained
with PPO on hand-rolled gradients, a time-varying LQR tracking benchmark,
and a Monte Carlo dispersion harness.
"""

from .geodesy import EARTH_RADIUS, GeoPosition, haversine_distance, wrap_pi
from .guidance import (ReferenceField, SpeedProfile, VelocityTriple,
                       evaluate_field)
from .dynamics import (EARTH, NOMINAL_AERO, AeroModel, ConstraintLimits,
                       PlanetModel, VehicleState, path_constraints, rk4_step,
                       state_derivative, wall_temperature)
from .actuation import (ActuationParams, IDEAL_ACTUATION, NOMINAL_ACTUATION,
                        scale_commands)
from .scenarios import Range, ScenarioConfig, scenario_from_label
from .environment import GlideEnv, TerminationReason, terminal_metrics
from .neural import GaussianPolicy, RecurrentNet, build_networks
from .ppo import (Trainer, TrainerConfig, load_checkpoint, rollout,
                  save_checkpoint)
from .controllers import (FieldTrackingController, PolicyController,
                          ZeroController)
from .lqr import (GainSchedule, LqrController, LqrWeights,
                  ReferenceTrajectory, generate_reference, riccati_backward)
from .campaign import (CampaignSpec, CampaignStats, aggregate, emit_report,
                       make_controller, run_campaign)

__version__ = "0.1.0"

__all__ = [
    "EARTH_RADIUS", "GeoPosition", "haversine_distance", "wrap_pi",
    "ReferenceField", "SpeedProfile", "VelocityTriple", "evaluate_field",
    "EARTH", "NOMINAL_AERO", "AeroModel", "ConstraintLimits", "PlanetModel",
    "VehicleState", "path_constraints", "rk4_step", "state_derivative",
    "wall_temperature",
    "ActuationParams", "IDEAL_ACTUATION", "NOMINAL_ACTUATION", "scale_commands",
    "Range", "ScenarioConfig", "scenario_from_label",
    "GlideEnv", "TerminationReason", "terminal_metrics",
    "GaussianPolicy", "RecurrentNet", "build_networks",
    "Trainer", "TrainerConfig", "load_checkpoint", "rollout", "save_checkpoint",
    "FieldTrackingController", "PolicyController", "ZeroController",
    "GainSchedule", "LqrController", "LqrWeights", "ReferenceTrajectory",
    "generate_reference", "riccati_backward",
    "CampaignSpec", "CampaignStats", "aggregate", "emit_report",
    "make_controller", "run_campaign",
    "__version__",
]
