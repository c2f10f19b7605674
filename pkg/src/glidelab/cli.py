"""Command-line interface for training, evaluation, and reporting.

Subcommands:
  train     train the recurrent policy on a scenario and save checkpoints
  eval      Monte Carlo evaluation of a saved policy checkpoint
  run       fly one recorded episode and write a per-substep trajectory log
  reftraj   record a nominal reference trajectory for the tracking benchmark
  lqr-fit   compute a time-varying gain schedule along a reference
  lqr-eval  Monte Carlo evaluation of the LQR tracker
  report    merge campaign summary files into one table on stdout

Relative --out paths resolve under $GLIDELAB_OUT (default "runs").
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import campaign as mc
from . import lqr
from .controllers import FieldTrackingController, PolicyController
from .ppo import Trainer, TrainerConfig, save_checkpoint, write_history
from .environment import GlideEnv
from .scenarios import scenario_from_label


def _outdir(path: str) -> str:
    root = os.environ.get("GLIDELAB_OUT", "runs")
    full = path if os.path.isabs(path) else os.path.join(root, path)
    os.makedirs(full, exist_ok=True)
    return full


def _load_config(path):
    if path is None:
        return {}
    import yaml
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError("config file must contain a mapping")
    return data


def _trainer_config(overrides: dict) -> TrainerConfig:
    cfg = TrainerConfig()
    unknown = set(overrides) - set(cfg._fields)
    if unknown:
        raise ValueError(f"unknown trainer config keys: {sorted(unknown)}")
    return cfg._replace(**overrides)


def cmd_train(args) -> int:
    outdir = _outdir(args.out)
    overrides = _load_config(args.config)
    if args.updates is not None:
        overrides["max_updates"] = args.updates
    config = _trainer_config(overrides)

    scenario = scenario_from_label(args.scenario)
    if not args.no_constraint_termination:
        scenario = scenario._replace(constraint_enforcement=True)
    env = GlideEnv(scenario, np.random.default_rng(args.seed))
    trainer = Trainer(env, config, args.seed)
    if args.init_checkpoint:
        meta = trainer.warm_start(args.init_checkpoint)
        print(f"warm start from {args.init_checkpoint} "
              f"(scenario {meta.get('scenario', '?')}, "
              f"update {meta.get('update', '?')})", flush=True)

    best = {"score": (-1.0, float("inf"))}

    def checkpoint(row: dict) -> None:
        print("update {update:4d}  ep {episodes:6d}  reward {mean_reward:8.3f}  "
              "miss {miss_mean:9.0f} m  success {success_rate:5.1%}  "
              "viol {violations:2d}  kl {kl:9.2e}".format(**row), flush=True)
        period = args.checkpoint_every
        if row["update"] % period == period - 1 or row["update"] == config.max_updates - 1:
            save_checkpoint(os.path.join(outdir, "checkpoint.npz"),
                            trainer.policy, trainer.value, trainer.normalizer,
                            {"scenario": scenario.label, "seed": args.seed,
                             "update": row["update"]})
            write_history(os.path.join(outdir, "history.tsv"), trainer.history)
        score = (row["success_rate"], -row["miss_mean"])
        if score > best["score"]:
            best["score"] = score
            save_checkpoint(os.path.join(outdir, "checkpoint_best.npz"),
                            trainer.policy, trainer.value, trainer.normalizer,
                            {"scenario": scenario.label, "seed": args.seed,
                             "update": row["update"]})

    trainer.train(callback=checkpoint)
    save_checkpoint(os.path.join(outdir, "checkpoint.npz"), trainer.policy,
                    trainer.value, trainer.normalizer,
                    {"scenario": scenario.label, "seed": args.seed,
                     "update": len(trainer.history) - 1})
    write_history(os.path.join(outdir, "history.tsv"), trainer.history)
    print(f"saved {outdir}/checkpoint.npz and history.tsv")
    return 0


def _run_campaign_cmd(args, controller_spec: str, label_suffix: str) -> int:
    outdir = _outdir(args.out)
    spec = mc.scenario_campaign(args.scenario, args.episodes, args.seed,
                                controller_spec)

    def progress(done: int, total: int) -> None:
        if done % 50 == 0 or done == total:
            print(f"\r{done}/{total} episodes", end="", flush=True)

    results = mc.run_campaign(spec, workers=args.workers, progress=progress)
    print()
    stats = mc.aggregate(spec.scenario.label + label_suffix, results)
    mc.emit_report(outdir, stats, results)
    print("  ".join(f"{c}={getattr(stats, c)}" for c in mc.SUMMARY_COLUMNS))
    return 0


def cmd_eval(args) -> int:
    return _run_campaign_cmd(args, f"policy:{args.checkpoint}", "")


def cmd_lqr_eval(args) -> int:
    return _run_campaign_cmd(args, f"lqr:{args.gains}:{args.ref}", "/lqr")


def cmd_run(args) -> int:
    outdir = _outdir(args.out)
    scenario = scenario_from_label(args.scenario)
    controller = mc.make_controller(args.controller)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(0,)))
    env = GlideEnv(scenario, rng)
    obs = env.reset(record_trace=True)
    controller.reset()
    done, total = False, 0.0
    while not done:
        obs, reward, done, info = env.step(controller.act(obs, env.ep))
        total += reward
    miss, alt_err, speed_err = info["terminal_metrics"]
    mc.write_trajectory_log(os.path.join(outdir, "trajectory.tsv"), env.ep)
    print(f"reason={info['reason'].name} miss={miss:.1f} m "
          f"alt_err={alt_err:.1f} m speed_err={speed_err:.1f} m/s "
          f"reward={total:.2f} steps={env.ep.steps}")
    print(f"wrote {outdir}/trajectory.tsv")
    return 0


def cmd_reftraj(args) -> int:
    outdir = _outdir(args.out)
    scenario = scenario_from_label(args.scenario)
    if args.checkpoint:
        controller = PolicyController.from_checkpoint(args.checkpoint)
    else:
        controller = FieldTrackingController()
    rng = np.random.default_rng(args.seed)
    ref, (miss, alt_err, speed_err) = lqr.generate_reference(
        scenario, controller, rng)
    path = os.path.join(outdir, "reference.tsv")
    ref.save(path)
    print(f"wrote {path}: {len(ref.times)} nodes, span {ref.span[1]:.0f} s, "
          f"miss={miss:.1f} m alt_err={alt_err:.1f} m speed_err={speed_err:.1f} m/s")
    return 0


def cmd_lqr_fit(args) -> int:
    outdir = _outdir(args.out)
    ref = lqr.ReferenceTrajectory.load(args.ref)
    schedule = lqr.riccati_backward(ref)
    path = os.path.join(outdir, "gains.npz")
    schedule.save(path)
    peak = float(np.abs(schedule.gains).max())
    print(f"wrote {path}: {len(schedule.times)} nodes, max |K|={peak:.3e}")
    return 0


def cmd_report(args) -> int:
    print("\t".join(mc.SUMMARY_COLUMNS))
    for path in args.summaries:
        stats = mc.read_summary(path)
        print("\t".join(str(getattr(stats, c)) for c in mc.SUMMARY_COLUMNS))
    return 0


def _add_campaign_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="Optim")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glidelab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the recurrent policy")
    p.add_argument("--scenario", default="Optim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--updates", type=int, default=None)
    p.add_argument("--config", default=None, help="YAML TrainerConfig overrides")
    p.add_argument("--checkpoint-every", type=int, default=10)
    p.add_argument("--no-constraint-termination", action="store_true",
                   help="train without terminating on constraint violations")
    p.add_argument("--init-checkpoint", default=None,
                   help="warm-start networks from an existing checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Monte Carlo evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    _add_campaign_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="fly one episode and log the trajectory")
    p.add_argument("--controller", default="field",
                   help="zero | field | policy:<ckpt> | lqr:<gains>:<ref>")
    p.add_argument("--scenario", default="Ideal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reftraj", help="record a nominal reference trajectory")
    p.add_argument("--scenario", default="Ideal-E")
    p.add_argument("--checkpoint", default=None,
                   help="record under a trained policy instead of the field tracker")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reftraj)

    p = sub.add_parser("lqr-fit", help="fit a gain schedule to a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lqr_fit)

    p = sub.add_parser("lqr-eval", help="Monte Carlo evaluation of the LQR tracker")
    p.add_argument("--gains", required=True)
    p.add_argument("--ref", required=True)
    _add_campaign_args(p)
    p.set_defaults(func=cmd_lqr_eval)

    p = sub.add_parser("report", help="merge summary files into one table")
    p.add_argument("summaries", nargs="+")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (lqr.LqrError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
