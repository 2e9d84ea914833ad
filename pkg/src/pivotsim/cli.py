"""Command-line entry points: train, eval, sweep, cycle, rollout, print-config.

Every command resolves its config (defaults <- config file <- flags), writes
the resolved config next to its outputs, and exits nonzero with a readable
message on any invalid config or checkpoint.  Training logs stream to CSV as
they are produced; checkpoints are periodic plus final, and training can
resume from a checkpoint.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace

from .config import (
    ConfigError,
    RunConfig,
    config_to_dict,
    default_config,
    dump_config,
    load_config,
)
from .evaluation import dump_trajectory, evaluate, friction_sweep, target_cycle
from .policy import CheckpointError, load_checkpoint, save_checkpoint
from .trpo import train

logger = logging.getLogger("pivotsim")

TRAIN_LOG_COLUMNS = (
    "iteration",
    "avg_return",
    "avg_steps_to_goal",
    "success_rate",
    "mean_kl",
    "surrogate_improvement",
    "step_accepted",
    "wall_time_s",
)
EVAL_LOG_COLUMNS = ("iteration", "avg_reward", "avg_steps_to_goal", "success_rate")


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if getattr(args, "out", None) is not None:
        cfg = replace(cfg, output_dir=args.out)
    if getattr(args, "iterations", None) is not None:
        cfg = replace(cfg, iterations=args.iterations)
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, workers=args.workers)
    cfg.validate()
    return cfg


def _prepare_out(cfg: RunConfig) -> str:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    dump_config(cfg, os.path.join(out, "resolved_config.json"))
    return out


def _load_policy(args, cfg: RunConfig):
    policy, baseline, extra = load_checkpoint(args.checkpoint)
    if tuple(policy.spec.layer_sizes) != tuple(cfg.policy.layer_sizes):
        raise CheckpointError(
            f"checkpoint policy shape {list(policy.spec.layer_sizes)} does not "
            f"match config policy.layer_sizes {list(cfg.policy.layer_sizes)}"
        )
    return policy, baseline, extra


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)

    start_policy = start_baseline = None
    start_iteration = 0
    if args.checkpoint:
        start_policy, start_baseline, extra = _load_policy(args, cfg)
        start_iteration = int(extra.get("iteration", 0))
        logger.info("resuming from %s at iteration %d", args.checkpoint, start_iteration)

    train_log = open(os.path.join(out, "training_log.csv"), "w", newline="")
    eval_log = open(os.path.join(out, "eval_log.csv"), "w", newline="")
    train_writer = csv.writer(train_log)
    train_writer.writerow(TRAIN_LOG_COLUMNS)
    eval_writer = csv.writer(eval_log)
    eval_writer.writerow(EVAL_LOG_COLUMNS)

    def on_iteration(row):
        train_writer.writerow([row[c] for c in TRAIN_LOG_COLUMNS])
        train_log.flush()
        logger.info(
            "iter %4d  return %8.3f  success %5.2f  kl %.5f  accepted %s",
            row["iteration"],
            row["avg_return"],
            row["success_rate"],
            row["mean_kl"],
            row["step_accepted"],
        )

    def on_eval(row):
        eval_writer.writerow([row[c] for c in EVAL_LOG_COLUMNS])
        eval_log.flush()
        logger.info(
            "eval @ iter %4d  reward %8.3f  success %5.2f",
            row["iteration"],
            row["avg_reward"],
            row["success_rate"],
        )

    def on_checkpoint(iteration, policy, baseline):
        save_checkpoint(
            os.path.join(out, f"checkpoint_{iteration:05d}.json"),
            policy,
            baseline,
            extra={"iteration": iteration, "master_seed": cfg.master_seed},
        )

    try:
        result = train(
            cfg.tool,
            cfg.friction,
            cfg.arm,
            cfg.mdp,
            cfg.randomization,
            cfg.policy,
            cfg.trpo,
            iterations=cfg.iterations,
            master_seed=cfg.master_seed,
            eval_protocol=cfg.eval,
            eval_every=cfg.eval_every,
            target_success=cfg.target_success,
            workers=cfg.workers,
            start_policy=start_policy,
            start_baseline=start_baseline,
            start_iteration=start_iteration,
            on_iteration=on_iteration,
            on_eval=on_eval,
            on_checkpoint=on_checkpoint,
            checkpoint_every=cfg.checkpoint_every,
        )
    finally:
        train_log.close()
        eval_log.close()
    save_checkpoint(
        os.path.join(out, "checkpoint_final.json"),
        result.policy,
        result.baseline,
        extra={"iteration": result.iterations_run, "master_seed": cfg.master_seed},
    )
    logger.info("finished after %d iterations (early stop: %s)", result.iterations_run, result.stopped_early)
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    policy, _, _ = _load_policy(args, cfg)
    metrics = evaluate(policy, cfg.tool, cfg.friction, cfg.arm, cfg.mdp, cfg.eval, seed=cfg.master_seed)
    _write_json(os.path.join(out, "eval_summary.json"), metrics)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    policy, _, _ = _load_policy(args, cfg)
    rows = friction_sweep(
        policy, cfg.tool, cfg.friction, cfg.arm, cfg.mdp, cfg.eval, cfg.sweep, seed=cfg.master_seed
    )
    path = os.path.join(out, "sweep_results.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    _write_json(os.path.join(out, "sweep_summary.json"), {"rows": rows})
    print(json.dumps(rows, indent=2, sort_keys=True))
    return 0


def cmd_cycle(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    policy, _, _ = _load_policy(args, cfg)
    rows = target_cycle(
        policy,
        cfg.tool,
        cfg.friction,
        cfg.arm,
        cfg.mdp,
        cfg.eval,
        cfg.cycle,
        seed=cfg.master_seed,
        repeats=args.repeats,
    )
    path = os.path.join(out, "cycle_results.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    summary = {
        "legs": len(rows),
        "success_rate": sum(r["reached"] for r in rows) / len(rows),
        "avg_steps": sum(r["steps"] for r in rows) / len(rows),
    }
    _write_json(os.path.join(out, "cycle_summary.json"), summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_rollout(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    policy, _, _ = _load_policy(args, cfg)
    import math

    path = dump_trajectory(
        policy,
        cfg.tool,
        cfg.friction,
        cfg.arm,
        cfg.mdp,
        math.radians(args.init_deg),
        math.radians(args.target_deg),
        os.path.join(out, "trajectory.csv"),
        protocol=cfg.eval,
        seed=cfg.master_seed,
    )
    logger.info("trajectory written to %s", path)
    return 0


def cmd_print_config(args) -> int:
    cfg = load_config(args.config) if args.config else default_config()
    cfg.validate()
    print(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pivotsim",
        description="Train and evaluate tool-pivoting policies on the gripper/tool simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, checkpoint_required=False):
        p.add_argument("--config", help="JSON run config (defaults are used otherwise)")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--out", help="override output_dir")
        p.add_argument("--workers", type=int, help="override rollout worker count")
        p.add_argument("--iterations", type=int, help="override training iteration budget")
        p.add_argument(
            "--checkpoint",
            required=checkpoint_required,
            help="policy checkpoint JSON" + ("" if checkpoint_required else " (resume when training)"),
        )

    p = sub.add_parser("train", help="run TRPO training")
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on fresh episodes")
    add_common(p, checkpoint_required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate a checkpoint across friction multipliers")
    add_common(p, checkpoint_required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cycle", help="run the sequential target cycle")
    add_common(p, checkpoint_required=True)
    p.add_argument("--repeats", type=int, default=1, help="number of cycle repetitions")
    p.set_defaults(func=cmd_cycle)

    p = sub.add_parser("rollout", help="dump one trajectory CSV")
    add_common(p, checkpoint_required=True)
    p.add_argument("--init-deg", type=float, default=0.0, help="initial tool angle [deg]")
    p.add_argument("--target-deg", type=float, default=-60.0, help="target tool angle [deg]")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("print-config", help="print the resolved config as JSON")
    p.add_argument("--config", help="JSON run config (defaults are printed otherwise)")
    p.set_defaults(func=cmd_print_config)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
