"""Command-line entry points.

Commands: train-expert, train-gating, optimize-criteria, train-estimator,
evaluate, serve, export.  Every command is reproducible from --seed: the
same seed yields bit-identical exported artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .cma import interleaved_optimize, run_cma
from .config import ConfigError, RunConfig, load_config
from .core import RngStream
from .env import EpisodeSpec, run_episode
from .estimator import (
    HoldPolicy,
    ScriptedGaitPolicy,
    collect_dataset,
    estimator_velocity_fn,
    per_axis_mse,
    split_by_episode,
    train_estimator,
)
from .gaits import GaitType, SKILL_ORDER
from .nn import load_checkpoint, save_checkpoint
from .policy import (
    CompositePolicy,
    ExpertSet,
    GatingNetwork,
    ManualSwitchPolicy,
    make_expert,
)
from .rewards import Goal, RewardWeights, SwitchCriteria
from .sac import ExpertTrainer, GatingTrainer
from .trajectory_io import append_trajectory

TASKS = [g.value for g in SKILL_ORDER]


def _parse_criteria(text: str) -> SwitchCriteria:
    x1, x2 = (float(v) for v in text.split(","))
    return SwitchCriteria(x1, x2)


def _parse_goal(text: str) -> Goal:
    d, theta = (float(v) for v in text.split(","))
    return Goal(d, theta)


def _run_config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _fresh_bundle(cfg: RunConfig) -> ExpertSet:
    rng = RngStream(cfg.seed).child("experts")
    return ExpertSet([make_expert(g, rng.child(g.value), cfg.sac.hidden, cfg.gaits)
                      for g in SKILL_ORDER])


def _load_or_create_bundle(cfg: RunConfig, directory: str) -> ExpertSet:
    if os.path.exists(os.path.join(directory, "manifest.json")):
        return ExpertSet.load(directory)
    bundle = _fresh_bundle(cfg)
    bundle.save(directory)
    return bundle


def _write_curve_csv(path: str, stats) -> None:
    term_names = sorted({name for s in stats for name in s.term_means})
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "mean_return", "mean_step_reward", "invalid_episodes",
                         "sum_r_g", *term_names])
        for s in stats:
            writer.writerow([s.epoch, repr(s.mean_return), repr(s.mean_step_reward),
                             s.invalid_episodes, repr(s.sum_r_g),
                             *[repr(s.term_means.get(n, 0.0)) for n in term_names]])


def _write_history_csv(path: str, history) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["generation", "best_cost", "x1", "x2", "sigma"])
        for rec in history:
            writer.writerow([rec.generation, repr(float(rec.best_cost)), repr(float(rec.x1)),
                             repr(float(rec.x2)), repr(float(rec.sigma))])


def _load_gating(cfg: RunConfig, path: str | None) -> GatingNetwork:
    if path is None:
        return GatingNetwork.initialize(RngStream(cfg.seed).child("gating-init"), cfg.sac.hidden)
    nets, _ = load_checkpoint(path)
    return GatingNetwork(nets["gating"])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_train_expert(args) -> int:
    cfg = _run_config(args)
    task = GaitType(args.task)
    os.makedirs(args.out, exist_ok=True)
    bundle = _load_or_create_bundle(cfg, args.out)
    weights = RewardWeights.standstill_probe() if args.standstill_probe else None
    trainer = ExpertTrainer(task, cfg.env_settings(), cfg.sac,
                            RngStream(cfg.seed).child(f"train-{task.value}"), weights)
    stats = trainer.train(args.epochs)
    index = SKILL_ORDER.index(task)
    bundle.experts[index] = trainer.expert
    bundle.save(args.out)
    _write_curve_csv(os.path.join(args.out, f"{task.value}_curve.csv"), stats)
    for s in stats:
        print(f"epoch {s.epoch}: mean return {s.mean_return:.3f} "
              f"(invalid {s.invalid_episodes}/{s.episodes})")
    print(f"saved expert bundle to {args.out}")
    return 0


def cmd_train_gating(args) -> int:
    cfg = _run_config(args)
    bundle = ExpertSet.load(args.experts)
    criteria = _parse_criteria(args.criteria)
    trainer = GatingTrainer(bundle, cfg.env_settings(), cfg.sac,
                            RngStream(cfg.seed).child("train-gating"))
    stats = trainer.train(criteria, args.epochs)
    os.makedirs(args.out, exist_ok=True)
    save_checkpoint(os.path.join(args.out, "gating.ckpt"), {"gating": trainer.gating.net},
                    extras={"criteria": list(criteria.as_tuple())})
    _write_curve_csv(os.path.join(args.out, "gating_curve.csv"), stats)
    for s in stats:
        print(f"epoch {s.epoch}: mean return {s.mean_return:.3f} sum r_g {s.sum_r_g:.1f}")
    return 0


def cmd_optimize_criteria(args) -> int:
    cfg = _run_config(args)
    os.makedirs(args.out, exist_ok=True)
    rng = RngStream(cfg.seed).child("optimize")
    cma_cfg = cfg.cma
    if args.synthetic:
        peak = (2.2, 4.3)

        def cost(x1, x2):
            return -math.exp(-((x1 - peak[0]) ** 2 + (x2 - peak[1]) ** 2) / 2.0)

        cma, history = run_cma(cost, cma_cfg, rng, args.generations)
    else:
        bundle = ExpertSet.load(args.experts)
        gating = _load_gating(cfg, args.gating)
        trainer = GatingTrainer(bundle, cfg.env_settings(), cfg.sac,
                                RngStream(cfg.seed).child("train-gating"), gating)
        cma, history = interleaved_optimize(trainer, cma_cfg, rng, args.generations)
        save_checkpoint(os.path.join(args.out, "gating.ckpt"), {"gating": trainer.gating.net},
                        extras={"criteria": [cma.best.x1, cma.best.x2]})
    _write_history_csv(os.path.join(args.out, "criteria_history.csv"), history)
    with open(os.path.join(args.out, "criteria.json"), "w") as f:
        json.dump({"x1": cma.best.x1, "x2": cma.best.x2, "cost": cma.best_cost}, f, sort_keys=True)
    for rec in history:
        print(f"generation {rec.generation}: best cost {rec.best_cost:.6f} "
              f"criteria ({rec.x1:.3f}, {rec.x2:.3f})")
    return 0


def cmd_train_estimator(args) -> int:
    cfg = _run_config(args)
    settings = cfg.env_settings()
    rng = RngStream(cfg.seed).child("estimator")
    policies = [HoldPolicy(settings), ScriptedGaitPolicy(settings)]
    episodes = args.episodes if args.episodes is not None else cfg.estimator.episodes
    dataset = collect_dataset(policies, settings, episodes, rng.child("collect"))
    print(f"collected {len(dataset)} pairs from {episodes} episodes")
    epochs = args.epochs if args.epochs is not None else cfg.estimator.epochs
    net, curve = train_estimator(dataset, epochs, rng.child("train"),
                                 lr=cfg.estimator.lr, weight_decay=cfg.estimator.weight_decay,
                                 batch_size=cfg.estimator.batch_size)
    os.makedirs(args.out, exist_ok=True)
    save_checkpoint(os.path.join(args.out, "estimator.ckpt"), {"estimator": net})
    with open(os.path.join(args.out, "estimator_loss.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "holdout_mse"])
        for i, v in enumerate(curve):
            writer.writerow([i, repr(v)])
    _, val_mask = split_by_episode(dataset)
    if np.any(val_mask):
        axis = per_axis_mse(net, dataset.inputs[val_mask], dataset.targets[val_mask])
        print(f"held-out per-axis MSE: {axis[0]:.5f} {axis[1]:.5f} {axis[2]:.5f}")
    if args.save_dataset:
        header = [f"x{i}" for i in range(dataset.inputs.shape[1])] + ["vx", "vy", "vz"]
        with open(args.save_dataset, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row_x, row_y in zip(dataset.inputs, dataset.targets):
                writer.writerow([repr(v) for v in row_x] + [repr(v) for v in row_y])
    return 0


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    settings = cfg.env_settings()
    bundle = ExpertSet.load(args.experts)
    criteria = _parse_criteria(args.criteria)
    lo, hi = settings.sim.joint_lower, settings.sim.joint_upper
    if args.mode == "composite":
        gating = _load_gating(cfg, args.gating)
        policy = CompositePolicy(bundle, gating, lo, hi, deterministic=args.deterministic)
    else:
        policy = ManualSwitchPolicy(bundle, criteria, lo, hi, deterministic=args.deterministic)
    velocity_fn = None
    if args.use_estimated_velocity:
        if args.estimator is None:
            print("error: --use-estimated-velocity needs --estimator", file=sys.stderr)
            return 2
        nets, _ = load_checkpoint(args.estimator)
        velocity_fn = estimator_velocity_fn(nets["estimator"])
    rng = RngStream(cfg.seed).child("evaluate")
    export_file = open(args.export, "w") if args.export else None
    returns = []
    reference_returns = []
    try:
        for episode in range(args.episodes):
            episode_rng = rng.numbered_child(episode)
            goal = _parse_goal(args.goal) if args.goal else Goal.sample(episode_rng.child("goal"))
            spec = EpisodeSpec(mode="multi", goal=goal, criteria=criteria)
            traj = run_episode(policy, spec, settings, episode_rng, velocity_fn=velocity_fn)
            sum_rg = sum(s.reward_terms["r_g"] for s in traj.steps)
            returns.append(traj.total_reward())
            print(f"episode {episode}: goal d={goal.distance:.2f} theta={goal.angle:.2f} "
                  f"return {traj.total_reward():.3f} sum_r_g {sum_rg:.2f} "
                  f"{'ok' if traj.valid else 'INVALID: ' + traj.failure}")
            if velocity_fn is not None:
                # same seeds with ground-truth velocity, to report degradation
                ref = run_episode(policy, spec, settings, RngStream(cfg.seed).child("evaluate").numbered_child(episode))
                reference_returns.append(ref.total_reward())
            if export_file is not None:
                append_trajectory(traj, export_file)
    finally:
        if export_file is not None:
            export_file.close()
    if returns:
        print(f"mean return over {len(returns)} episodes: {float(np.mean(returns)):.3f}")
    if reference_returns:
        est = float(np.mean(returns))
        ref = float(np.mean(reference_returns))
        print(f"estimated-velocity degradation: {ref:.3f} (true) -> {est:.3f} "
              f"(estimated), delta {est - ref:+.3f}")
    return 0


def cmd_export(args) -> int:
    cfg = _run_config(args)
    settings = cfg.env_settings()
    if args.policy == "hold":
        policy = HoldPolicy(settings)
    else:
        policy = ScriptedGaitPolicy(settings)
    rng = RngStream(cfg.seed).child("export")
    spec = EpisodeSpec(mode="single", task=GaitType.TROT, n_steps=args.steps)
    traj = run_episode(policy, spec, settings, rng)
    with open(args.trajectory, "w") as f:
        append_trajectory(traj, f)
    print(f"wrote {len(traj)} steps to {args.trajectory}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SimSession, build_app

    cfg = _run_config(args)
    settings = cfg.env_settings()
    bundle = ExpertSet.load(args.experts)
    gating = _load_gating(cfg, args.gating)
    criteria = _parse_criteria(args.criteria)
    policy = CompositePolicy(bundle, gating, settings.sim.joint_lower, settings.sim.joint_upper,
                             deterministic=args.deterministic)
    estimator_net = None
    if args.estimator is not None:
        nets, _ = load_checkpoint(args.estimator)
        estimator_net = nets["estimator"]
    session = SimSession(policy, settings, criteria, RngStream(cfg.seed).child("serve"),
                         estimator_net=estimator_net)
    static_dir = args.static if args.static and os.path.isdir(args.static) else None
    app = build_app(session, static_dir=static_dir)
    session.start()
    print(f"telemetry on ws://{args.host}:{args.port}/ws")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        session.stop()
    return 0


def _add_common(p, out_default=None):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int, help="override the config seed")
    if out_default is not None:
        p.add_argument("--out", default=out_default, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multigait",
        description="Multi-skill quadruped locomotion: train gait experts, compose them "
                    "with a gating network, and optimize gait-switch distances.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-expert", help="train one single-skill expert by SAC")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--standstill-probe", action="store_true",
                   help="orientation+height reward only (reduced probe task)")
    _add_common(p, out_default="runs/experts")
    p.set_defaults(func=cmd_train_expert)

    p = sub.add_parser("train-gating", help="train the gating network over frozen experts")
    p.add_argument("--experts", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--criteria", default="2.0,5.0")
    _add_common(p, out_default="runs/gating")
    p.set_defaults(func=cmd_train_gating)

    p = sub.add_parser("optimize-criteria", help="CMA-ES over the switch distances")
    p.add_argument("--experts")
    p.add_argument("--gating")
    p.add_argument("--generations", type=int, default=10)
    p.add_argument("--synthetic", action="store_true",
                   help="optimize the built-in synthetic landscape instead of training")
    _add_common(p, out_default="runs/criteria")
    p.set_defaults(func=cmd_optimize_criteria)

    p = sub.add_parser("train-estimator", help="train the base-velocity estimator")
    p.add_argument("--episodes", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--save-dataset", help="also write the dataset as CSV")
    _add_common(p, out_default="runs/estimator")
    p.set_defaults(func=cmd_train_estimator)

    p = sub.add_parser("evaluate", help="run goal-tracking episodes")
    p.add_argument("--experts", required=True)
    p.add_argument("--mode", choices=["composite", "manual-switch"], default="composite")
    p.add_argument("--gating")
    p.add_argument("--criteria", default="2.0,5.0")
    p.add_argument("--goal", help="fixed goal 'd,theta' (default: random per episode)")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--export", help="write the trajectories as JSON lines")
    p.add_argument("--estimator")
    p.add_argument("--use-estimated-velocity", action="store_true")
    p.add_argument("--deterministic", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="export a scripted-policy trajectory (no checkpoints)")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--policy", choices=["hold", "scripted-trot"], default="hold")
    p.add_argument("--steps", type=int, default=250)
    _add_common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="telemetry/steering WebSocket service")
    p.add_argument("--experts", required=True)
    p.add_argument("--gating")
    p.add_argument("--criteria", default="2.0,5.0")
    p.add_argument("--estimator")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", default="frontend/dist")
    p.add_argument("--deterministic", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
