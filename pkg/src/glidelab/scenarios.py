"""Scenario catalog: named experiment configurations and their label grammar.

A scenario fixes every randomization knob of the episode generator: initial
condition ranges, target ranges, model perturbation magnitudes, actuator
failure/noise settings, sensor scale-factor error, optional mid-flight target
divert, and the mission geometry. Labels follow a compact grammar, e.g.
"Optim", "PV=5", "Divert=1.0-480", "MV/SV=10%", "Optim-E"; parse and format
round-trip.
"""

from __future__ import annotations

import math
import re
from typing import NamedTuple, Optional

from .actuation import ActuationParams


class UnknownScenario(ValueError):
    pass


class Range(NamedTuple):
    lo: float
    hi: float

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng) -> float:
        if self.lo == self.hi:
            return self.lo
        return float(rng.uniform(self.lo, self.hi))

    def collapsed(self) -> "Range":
        return Range(self.mid, self.mid)


class DivertSpec(NamedTuple):
    delta: float  # rad; lon and lat each shifted by U(-delta, +delta)
    time: float   # s


class ScenarioConfig(NamedTuple):
    label: str
    # Mission geometry and initial-condition ranges.
    d_init: float = 8000.0e3                                  # m
    h_init: Range = Range(99.8e3, 100.2e3)                    # m
    v_init: Range = Range(7430.0, 7470.0)                     # m/s
    lon_init: Range = Range(0.0, math.radians(50.0))
    lat_init: Range = Range(math.radians(-30.0), math.radians(30.0))
    gamma_init: Range = Range(math.radians(-0.55), math.radians(-0.45))
    heading_err_init: Range = Range(math.radians(-0.1), math.radians(0.1))
    # Target.
    v_targ: float = 1500.0                                    # m/s
    h_targ: float = 25.0e3                                    # m
    lat_targ: Range = Range(math.radians(-30.0), math.radians(30.0))
    # Per-episode model perturbations (uniform +/- bounds, as fractions).
    cl_var: float = 0.03
    cd_var: float = 0.03
    rho_var: float = 0.03
    mass_area_var: float = 0.0
    eps_obs: float = 0.0
    actuation: ActuationParams = ActuationParams()
    divert: Optional[DivertSpec] = None
    # Episode mechanics.
    constraint_enforcement: bool = False
    guidance_period: float = 5.0                              # s
    dt: float = 1.0                                           # s
    alpha_hold_speed: float = 4570.0                          # m/s
    max_steps: int = 4000                                     # guidance steps


def _ideal(label: str = "Ideal") -> ScenarioConfig:
    base = ScenarioConfig(label=label)
    return base._replace(
        h_init=base.h_init.collapsed(),
        v_init=base.v_init.collapsed(),
        lon_init=base.lon_init.collapsed(),
        lat_init=base.lat_init.collapsed(),
        gamma_init=base.gamma_init.collapsed(),
        heading_err_init=Range(0.0, 0.0),
        lat_targ=base.lat_targ.collapsed(),
        cl_var=0.0, cd_var=0.0, rho_var=0.0,
        eps_obs=0.0,
        actuation=ActuationParams(sigma_ctrl=0.0, p_fail=0.0),
    )


def _icv() -> ScenarioConfig:
    # Ideal plus initial state/target variation; still no model perturbation.
    return ScenarioConfig(label="ICV")._replace(
        cl_var=0.0, cd_var=0.0, rho_var=0.0,
        eps_obs=0.0,
        actuation=ActuationParams(sigma_ctrl=0.0, p_fail=0.0),
    )


def _optim() -> ScenarioConfig:
    return ScenarioConfig(label="Optim")


def _easy(cfg: ScenarioConfig) -> ScenarioConfig:
    """-E variant: no altitude/speed variation, no failure, no actuator lag.

    Mission geometry (initial longitude/latitude, target latitude) is also
    pinned to the midpoints so a single recorded reference trajectory matches
    every episode, which a fixed-trajectory tracker requires.
    """
    return cfg._replace(
        label=cfg.label + "-E",
        h_init=cfg.h_init.collapsed(),
        v_init=cfg.v_init.collapsed(),
        lon_init=cfg.lon_init.collapsed(),
        lat_init=cfg.lat_init.collapsed(),
        lat_targ=cfg.lat_targ.collapsed(),
        actuation=cfg.actuation._replace(p_fail=0.0, tau_ctrl=None),
    )


_DIVERT_RE = re.compile(r"^divert=([0-9.]+)-([0-9.]+)$", re.IGNORECASE)
_PV_RE = re.compile(r"^pv=([0-9.]+)$", re.IGNORECASE)
_MVSV_RE = re.compile(r"^mv/sv=([0-9.]+)%$", re.IGNORECASE)
_SN_RE = re.compile(r"^sn=([0-9.]+)$", re.IGNORECASE)


def _trim(x: float) -> str:
    return f"{x:g}"


def _decimal(x: float) -> str:
    """Like _trim but always keeps a decimal point (catalog prints 1.0)."""
    s = f"{x:g}"
    return s if ("." in s or "e" in s) else s + ".0"


def scenario_from_label(label: str) -> ScenarioConfig:
    """Build the scenario configuration named by a catalog label."""
    text = label.strip()
    easy = False
    if text.lower().endswith("-e"):
        easy = True
        text = text[:-2]

    low = text.lower()
    if low == "ideal":
        cfg = _ideal()
    elif low == "icv":
        cfg = _icv()
    elif low == "optim":
        cfg = _optim()
    elif low == "optim-noaf":
        cfg = _optim()._replace(
            label="Optim-noAF",
            actuation=ActuationParams()._replace(p_fail=0.0))
    elif low == "short":
        cfg = _optim()._replace(label="Short", d_init=6500.0e3)
    elif m := _DIVERT_RE.match(text):
        delta, t = float(m.group(1)), float(m.group(2))
        cfg = _optim()._replace(
            label=f"Divert={_decimal(delta)}-{_trim(t)}",
            divert=DivertSpec(math.radians(delta), t))
    elif m := _PV_RE.match(text):
        pct = float(m.group(1))
        cfg = _optim()._replace(
            label=f"PV={_trim(pct)}",
            cl_var=pct / 100.0, cd_var=pct / 100.0, rho_var=pct / 100.0)
    elif m := _SN_RE.match(text):
        pct = float(m.group(1))
        cfg = _optim()._replace(label=f"SN={_trim(pct)}", eps_obs=pct / 100.0)
    elif m := _MVSV_RE.match(text):
        pct = float(m.group(1))
        cfg = _optim()._replace(label=f"MV/SV={_trim(pct)}%",
                                mass_area_var=pct / 100.0)
    else:
        raise UnknownScenario(f"unknown scenario label: {label!r}")

    if easy:
        cfg = _easy(cfg)
    return cfg


def canonical_label(cfg: ScenarioConfig) -> str:
    return cfg.label
