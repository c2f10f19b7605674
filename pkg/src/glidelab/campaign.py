"""Monte Carlo dispersion campaigns over closed-loop episodes.

A campaign runs N independent episodes of one scenario under one controller
and aggregates terminal accuracy, constraint peaks, and success statistics.
Episode i draws from SeedSequence(seed, spawn_key=(i,)), so results are
reproducible and independent of how episodes are distributed over worker
processes: aggregation happens on the index-sorted result list.
"""

from __future__ import annotations

import multiprocessing
import os
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .actuation import DALPHA_MAX, DSIGMA_MAX
from .controllers import FieldTrackingController, PolicyController, ZeroController
from .dynamics import (DEFAULT_LIMITS, DynamicsError, VehicleState,
                       path_constraints)
from .geodesy import GeodesyError
from .environment import EpisodeState, GlideEnv, ned_miss, terminal_metrics
from .guidance import evaluate_field
from .scenarios import ScenarioConfig, scenario_from_label

MISS_LIMIT = 1000.0      # m, success gate on great-circle miss
ALT_ERR_LIMIT = 1000.0   # m, success gate on altitude error

SUMMARY_COLUMNS = ("scenario", "n", "miss_mu", "miss_sigma", "miss_max",
                   "alt_mu", "alt_sigma", "alt_max", "verr_mu", "verr_sigma",
                   "verr_max", "success_pct", "violation_pct")

EPISODE_COLUMNS = ("index", "miss", "alt_err", "speed_err", "steps", "reason",
                   "reward")
NED_COLUMNS = ("index", "east", "north")
CONSTRAINT_COLUMNS = ("index", "qdot_peak", "q_peak", "n_peak")

TRAJECTORY_COLUMNS = ("t", "R", "theta", "phi", "V", "gamma", "psi", "sigma",
                      "alpha", "Qdot", "q", "n", "d", "psi_err", "gamma_err",
                      "V_ref", "reward")


class ControllerLoadError(ValueError):
    pass


class CampaignSpec(NamedTuple):
    scenario: ScenarioConfig
    episodes: int
    seed: int
    controller: str   # "zero" | "field" | "policy:<ckpt>" | "lqr:<gains>:<ref>"


class EpisodeResult(NamedTuple):
    index: int
    miss: float
    alt_err: float
    speed_err: float
    east: float
    north: float
    qdot_peak: float
    q_peak: float
    n_peak: float
    steps: int
    reason: str
    reward: float

    @property
    def success(self) -> bool:
        return self.miss < MISS_LIMIT and abs(self.alt_err) < ALT_ERR_LIMIT

    @property
    def violated(self) -> bool:
        lim = DEFAULT_LIMITS
        return (self.qdot_peak > lim.heat_rate or self.q_peak > lim.dyn_pressure
                or self.n_peak > lim.load)


class CampaignStats(NamedTuple):
    scenario: str
    n: int
    miss_mu: float
    miss_sigma: float
    miss_max: float
    alt_mu: float
    alt_sigma: float
    alt_max: float
    verr_mu: float
    verr_sigma: float
    verr_max: float
    success_pct: float
    violation_pct: float


def make_controller(spec: str):
    """Build a controller from its campaign spec string."""
    try:
        if spec == "zero":
            return ZeroController()
        if spec == "field":
            return FieldTrackingController()
        if spec.startswith("policy:"):
            return PolicyController.from_checkpoint(spec.split(":", 1)[1])
        if spec.startswith("lqr:"):
            from .lqr import GainSchedule, LqrController, ReferenceTrajectory
            _, gains_path, ref_path = spec.split(":", 2)
            return LqrController(GainSchedule.load(gains_path),
                                 ReferenceTrajectory.load(ref_path))
    except (OSError, ValueError) as exc:
        raise ControllerLoadError(f"cannot load controller {spec!r}: {exc}") \
            from exc
    raise ControllerLoadError(f"unknown controller spec {spec!r}")


def run_episode(scenario: ScenarioConfig, controller, seed: int,
                index: int, record_trace: bool = False) -> EpisodeResult:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    env = GlideEnv(scenario, rng)
    total_reward = 0.0
    try:
        obs = env.reset(record_trace=record_trace)
        controller.reset()
        done = False
        while not done:
            obs, reward, done, _ = env.step(controller.act(obs, env.ep))
            total_reward += reward
    except (DynamicsError, GeodesyError):
        # A blown-up or unsatisfiable episode counts as a maximally failed
        # sample, not an abort.
        ep = env.ep
        peaks = (ep.qdot_peak, ep.q_peak, ep.n_peak) if ep is not None \
            else (0.0, 0.0, 0.0)
        steps = ep.steps if ep is not None else 0
        return EpisodeResult(index, float("inf"), float("inf"), float("inf"),
                             float("inf"), float("inf"), peaks[0], peaks[1],
                             peaks[2], steps, "ERROR", total_reward)
    ep = env.ep
    miss, alt_err, speed_err = terminal_metrics(ep, check_done=True)
    east, north = ned_miss(ep)
    return EpisodeResult(index, miss, alt_err, speed_err, east, north,
                         ep.qdot_peak, ep.q_peak, ep.n_peak, ep.steps,
                         ep.reason.name, total_reward)


# Per-worker state, populated once by the pool initializer (fork start method).
_WORKER: dict = {}


def _init_worker(scenario: ScenarioConfig, controller_spec: str,
                 seed: int) -> None:
    _WORKER["scenario"] = scenario
    _WORKER["controller"] = make_controller(controller_spec)
    _WORKER["seed"] = seed


def _worker_episode(index: int) -> EpisodeResult:
    return run_episode(_WORKER["scenario"], _WORKER["controller"],
                       _WORKER["seed"], index)


def run_campaign(spec: CampaignSpec, workers: int = 1,
                 progress=None) -> list:
    """Run all episodes; returns EpisodeResults sorted by index."""
    if workers <= 1:
        controller = make_controller(spec.controller)
        results = []
        for i in range(spec.episodes):
            results.append(run_episode(spec.scenario, controller, spec.seed, i))
            if progress:
                progress(len(results), spec.episodes)
        return results
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers, initializer=_init_worker,
                  initargs=(spec.scenario, spec.controller, spec.seed)) as pool:
        results = []
        for res in pool.imap_unordered(_worker_episode, range(spec.episodes),
                                       chunksize=4):
            results.append(res)
            if progress:
                progress(len(results), spec.episodes)
    results.sort(key=lambda r: r.index)
    return results


def aggregate(label: str, results: Sequence[EpisodeResult]) -> CampaignStats:
    miss = np.array([r.miss for r in results])
    alt = np.abs([r.alt_err for r in results])
    verr = np.abs([r.speed_err for r in results])
    n = len(results)
    success = 100.0 * sum(r.success for r in results) / n
    violation = 100.0 * sum(r.violated for r in results) / n
    return CampaignStats(label, n,
                         float(miss.mean()), float(miss.std()), float(miss.max()),
                         float(alt.mean()), float(alt.std()), float(alt.max()),
                         float(verr.mean()), float(verr.std()), float(verr.max()),
                         success, violation)


CONSTRAINT_SUMMARY_COLUMNS = ("constraint", "mu", "sigma", "max", "limit")


def constraint_stats(results: Sequence[EpisodeResult]) -> list:
    """Mean/std/max of the per-episode constraint peaks, with their limits."""
    lim = DEFAULT_LIMITS
    rows = []
    for name, values, limit in [
            ("heat_rate", [r.qdot_peak for r in results], lim.heat_rate),
            ("load", [r.n_peak for r in results], lim.load),
            ("dyn_pressure", [r.q_peak for r in results], lim.dyn_pressure)]:
        arr = np.asarray(values, dtype=float)
        rows.append([name, float(arr.mean()), float(arr.std()),
                     float(arr.max()), limit])
    return rows


def _write_rows(path, columns, rows) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def emit_report(outdir, stats: Optional[CampaignStats],
                results: Sequence[EpisodeResult]) -> None:
    """Write summary, per-episode, NED scatter, and constraint files.

    An empty result list produces header-only files.
    """
    os.makedirs(outdir, exist_ok=True)
    _write_rows(os.path.join(outdir, "summary.tsv"), SUMMARY_COLUMNS,
                [[getattr(stats, c) for c in SUMMARY_COLUMNS]]
                if stats is not None else [])
    _write_rows(os.path.join(outdir, "episodes.tsv"), EPISODE_COLUMNS,
                [[r.index, r.miss, r.alt_err, r.speed_err, r.steps, r.reason,
                  r.reward] for r in results])
    _write_rows(os.path.join(outdir, "ned.tsv"), NED_COLUMNS,
                [[r.index, r.east, r.north] for r in results])
    _write_rows(os.path.join(outdir, "constraints.tsv"), CONSTRAINT_COLUMNS,
                [[r.index, r.qdot_peak, r.q_peak, r.n_peak] for r in results])
    _write_rows(os.path.join(outdir, "constraints_summary.tsv"),
                CONSTRAINT_SUMMARY_COLUMNS,
                constraint_stats(results) if results else [])


def read_summary(path) -> CampaignStats:
    with open(path) as fh:
        header = fh.readline().strip().split("\t")
        values = fh.readline().strip().split("\t")
    if tuple(header) != SUMMARY_COLUMNS:
        raise ValueError(f"unexpected summary columns {header}")
    fields = [values[0], int(values[1])] + [float(v) for v in values[2:]]
    return CampaignStats(*fields)


def write_trajectory_log(path, ep: EpisodeState) -> None:
    """Expand a recorded trace into a full per-substep diagnostic log.

    Constraint loads use the episode's sampled aero model; guidance errors
    are recomputed from the episode's own target and speed profile. The
    reward column is the instantaneous shaping-minus-control term.
    """
    from .environment import CTRL_WEIGHT, SIGMA_V_FRACTION
    from .geodesy import GeoPosition
    from .guidance import VelocityTriple

    if ep.trace is None:
        raise ValueError("episode was not run with record_trace=True")
    rows = []
    for t, r, th, ph, v, ga, ps, sg, al, c0, c1 in ep.trace:
        pos = GeoPosition(r, th, ph)
        vel = VelocityTriple(v, ga, ps)
        state = VehicleState(pos, vel, sg, al, 0.0, 0.0, t)
        cs = path_constraints(state, ep.aero)
        field = evaluate_field(pos, vel, ep.target, ep.profile)
        sig_v = SIGMA_V_FRACTION * max(v, 1.0)
        err2 = float(np.dot(field.v_err_cartesian, field.v_err_cartesian))
        shaping = float(np.exp(-err2 / (sig_v * sig_v)))
        ctrl = CTRL_WEIGHT * float(np.hypot(c0 / DSIGMA_MAX, c1 / DALPHA_MAX))
        rows.append([t, r, th, ph, v, ga, ps, sg, al,
                     cs.heat_rate, cs.dyn_pressure, cs.load,
                     field.d, field.psi_err, field.gamma_err,
                     field.v_ref.speed, shaping - ctrl])
    _write_rows(path, TRAJECTORY_COLUMNS, rows)


def scenario_campaign(label: str, episodes: int, seed: int,
                      controller: str) -> CampaignSpec:
    return CampaignSpec(scenario_from_label(label), episodes, seed, controller)
