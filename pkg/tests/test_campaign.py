"""Tests for the Monte Carlo campaign harness.

Episode seeding is keyed by index, so a campaign's records must be
identical no matter how many workers ran it. Aggregation and report files
are checked against hand-computed statistics on synthetic records.
"""

import math

import numpy as np
import pytest

from glidelab.campaign import (CONSTRAINT_SUMMARY_COLUMNS, EPISODE_COLUMNS,
                               SUMMARY_COLUMNS, TRAJECTORY_COLUMNS,
                               CampaignSpec, ControllerLoadError,
                               EpisodeResult, aggregate, constraint_stats,
                               emit_report, make_controller, read_summary,
                               run_campaign, run_episode, scenario_campaign,
                               write_trajectory_log)
from glidelab.controllers import (FieldTrackingController, PolicyController,
                                  ZeroController)
from glidelab.dynamics import DEFAULT_LIMITS
from glidelab.environment import GlideEnv
from glidelab.neural import build_networks
from glidelab.ppo import ObservationNormalizer, save_checkpoint
from glidelab.scenarios import scenario_from_label


def _short_scenario(max_steps=30):
    # Truncated episodes keep the harness tests fast; the records are still
    # full EpisodeResults with terminal metrics at the step limit.
    return scenario_from_label("Optim")._replace(max_steps=max_steps)


def _result(index=0, miss=100.0, alt=50.0, verr=10.0, qdot=1e6, q=2e4,
            n=30.0, reason="FLYBY"):
    return EpisodeResult(index, miss, alt, verr, miss, 0.0, qdot, q, n,
                         200, reason, 15.0)


def test_worker_count_does_not_change_records():
    spec = CampaignSpec(_short_scenario(), episodes=10, seed=42,
                        controller="zero")
    serial = run_campaign(spec, workers=1)
    pooled = run_campaign(spec, workers=4)
    assert serial == pooled
    assert [r.index for r in serial] == list(range(10))


def test_run_episode_seeding_is_per_index():
    scen = _short_scenario()
    ctl = ZeroController()
    a = run_episode(scen, ctl, seed=3, index=5)
    b = run_episode(scen, ctl, seed=3, index=5)
    c = run_episode(scen, ctl, seed=3, index=6)
    assert a == b
    assert a != c


def test_aggregate_matches_hand_statistics():
    results = [
        _result(0, miss=100.0, alt=-200.0, verr=5.0),
        _result(1, miss=900.0, alt=400.0, verr=-15.0),
        _result(2, miss=3000.0, alt=100.0, verr=25.0),
        _result(3, miss=50.0, alt=-2000.0, verr=-35.0,
                qdot=DEFAULT_LIMITS.heat_rate * 1.1),
    ]
    stats = aggregate("Optim", results)
    miss = np.array([100.0, 900.0, 3000.0, 50.0])
    alt = np.array([200.0, 400.0, 100.0, 2000.0])
    verr = np.array([5.0, 15.0, 25.0, 35.0])
    assert stats.scenario == "Optim" and stats.n == 4
    assert stats.miss_mu == pytest.approx(miss.mean())
    assert stats.miss_sigma == pytest.approx(miss.std())
    assert stats.miss_max == miss.max()
    assert stats.alt_mu == pytest.approx(alt.mean())    # absolute values
    assert stats.alt_max == alt.max()
    assert stats.verr_mu == pytest.approx(verr.mean())
    assert stats.verr_max == verr.max()
    # Successes: episodes 0 and 1 (miss < 1000 and |alt| < 1000).
    assert stats.success_pct == 50.0
    assert stats.violation_pct == 25.0


def test_success_and_violation_properties():
    lim = DEFAULT_LIMITS
    assert _result().success and not _result().violated
    assert not _result(miss=1500.0).success
    assert not _result(alt=-1200.0).success
    assert _result(qdot=lim.heat_rate + 1.0).violated
    assert _result(q=lim.dyn_pressure + 1.0).violated
    assert _result(n=lim.load + 0.1).violated
    # An errored episode counts as a failed sample, never a success.
    err = _result(miss=math.inf, alt=math.inf, verr=math.inf, reason="ERROR")
    assert not err.success


def test_constraint_stats_rows():
    results = [_result(0, qdot=1e6, q=2e4, n=30.0),
               _result(1, qdot=2e6, q=4e4, n=50.0)]
    rows = constraint_stats(results)
    by_name = {r[0]: r for r in rows}
    assert set(by_name) == {"heat_rate", "load", "dyn_pressure"}
    name, mu, sigma, mx, limit = by_name["heat_rate"]
    assert (mu, mx, limit) == (1.5e6, 2e6, DEFAULT_LIMITS.heat_rate)
    assert sigma == pytest.approx(np.std([1e6, 2e6]))
    assert by_name["load"][1:] == [40.0, pytest.approx(10.0), 50.0,
                                   DEFAULT_LIMITS.load]
    assert by_name["dyn_pressure"][4] == DEFAULT_LIMITS.dyn_pressure


def test_emit_report_and_read_summary_round_trip(tmp_path):
    results = [_result(i, miss=100.0 * (i + 1)) for i in range(5)]
    stats = aggregate("Optim", results)
    emit_report(tmp_path, stats, results)

    back = read_summary(tmp_path / "summary.tsv")
    assert back == stats

    for name, expect in [("episodes.tsv", 6), ("ned.tsv", 6),
                         ("constraints.tsv", 6),
                         ("constraints_summary.tsv", 4)]:
        with open(tmp_path / name) as fh:
            assert len(fh.readlines()) == expect
    with open(tmp_path / "episodes.tsv") as fh:
        assert fh.readline().strip() == "\t".join(EPISODE_COLUMNS)


def test_emit_report_empty_results(tmp_path):
    emit_report(tmp_path, None, [])
    for name in ("summary.tsv", "episodes.tsv", "ned.tsv", "constraints.tsv",
                 "constraints_summary.tsv"):
        with open(tmp_path / name) as fh:
            lines = fh.readlines()
        assert len(lines) == 1, name


def test_read_summary_rejects_unknown_columns(tmp_path):
    path = tmp_path / "summary.tsv"
    path.write_text("foo\tbar\n1\t2\n")
    with pytest.raises(ValueError):
        read_summary(path)


def test_make_controller_specs(tmp_path):
    assert isinstance(make_controller("zero"), ZeroController)
    assert isinstance(make_controller("field"), FieldTrackingController)

    rng = np.random.default_rng(0)
    policy, value = build_networks(9, 2, rng)
    norm = ObservationNormalizer(9)
    ckpt = tmp_path / "policy.npz"
    save_checkpoint(ckpt, policy, value, norm)
    ctl = make_controller(f"policy:{ckpt}")
    assert isinstance(ctl, PolicyController)
    np.testing.assert_array_equal(ctl.policy.params, policy.params)

    for bad in ("bogus", "policy:/does/not/exist.npz",
                "lqr:/no/gains.npz:/no/ref.tsv"):
        with pytest.raises(ControllerLoadError):
            make_controller(bad)


def test_scenario_campaign_builds_spec():
    spec = scenario_campaign("Ideal", 7, 11, "zero")
    assert spec.scenario.label == "Ideal"
    assert (spec.episodes, spec.seed, spec.controller) == (7, 11, "zero")


def test_write_trajectory_log(tmp_path):
    env = GlideEnv(_short_scenario(max_steps=8), np.random.default_rng(2))
    obs = env.reset(record_trace=True)
    ctl = ZeroController()
    done = False
    while not done:
        obs, _, done, _ = env.step(ctl.act(obs, env.ep))
    path = tmp_path / "trajectory.tsv"
    write_trajectory_log(path, env.ep)

    with open(path) as fh:
        assert fh.readline().strip() == "\t".join(TRAJECTORY_COLUMNS)
    data = np.loadtxt(path, skiprows=1)
    assert data.shape == (len(env.ep.trace), len(TRAJECTORY_COLUMNS))
    assert np.isfinite(data).all()
    cols = {name: i for i, name in enumerate(TRAJECTORY_COLUMNS)}
    assert (data[:, cols["V_ref"]] > 0).all()
    assert (data[:, cols["Qdot"]] >= 0).all()
    # Times step the integrator grid from the reset row at t = 0.
    assert data[0, 0] == 0.0 and np.all(np.diff(data[:, 0]) > 0)

    # A trace-less episode cannot be expanded.
    env2 = GlideEnv(_short_scenario(max_steps=2), np.random.default_rng(3))
    env2.reset()
    done = False
    while not done:
        _, _, done, _ = env2.step(np.zeros(2))
    with pytest.raises(ValueError):
        write_trajectory_log(tmp_path / "x.tsv", env2.ep)
