"""Stress a trained policy: friction mismatch sweep, target cycle, new tool.

Loads the checkpoint demo 03 wrote (or --checkpoint) and answers three
questions the training curve cannot:

  1. How far off can the true Coulomb/stiction level be from the training
     value before the policy folds?  (friction multiplier sweep)
  2. Can it chain targets back to back, carrying its own end state?
     (45 -> 0 -> -60 -> 30 -> 5 -> 0 degree cycle)
  3. Does it survive a swap to the second tool's inertia and geometry with
     the friction left at the tool-1 values?  (hardware swap analog)

Policies trained with the default friction randomization tend to hold up
across the whole sweep; policies trained with randomization disabled
typically collapse away from 1.0x (try it: train with
RandomizationConfig.disabled() and rerun this).
"""

import argparse

import numpy as np

from pivotsim.config import default_config, tool2
from pivotsim.evaluation import EvalProtocol, evaluate, friction_sweep, target_cycle
from pivotsim.policy import load_checkpoint

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--checkpoint", default="demo_policy.json")
parser.add_argument("--episodes", type=int, default=50, help="episodes per sweep point")
args = parser.parse_args()

try:
    policy, _, extra = load_checkpoint(args.checkpoint)
except Exception as e:
    raise SystemExit(
        f"cannot load {args.checkpoint!r} ({e}); run demos/03_train_small.py first"
    )

cfg = default_config()
proto = EvalProtocol(n_episodes=args.episodes)

print(f"policy: {args.checkpoint} (trained {extra.get('iterations', '?')} iterations)\n")

print("== friction mismatch sweep (multiplier on Coulomb + stiction gains) ==")
rows = friction_sweep(policy, cfg.tool, cfg.friction, cfg.arm, cfg.mdp, protocol=proto)
print(f"{'multiplier':>11} {'success':>8} {'avg steps':>10} {'avg reward':>11}")
for r in rows:
    bar = "#" * round(20 * r["success_rate"])
    print(
        f"{r['multiplier']:11.2f} {r['success_rate']:8.2f} {r['avg_steps_to_goal']:10.1f} "
        f"{r['avg_reward']:11.2f}  {bar}"
    )

print("\n== target cycle, carrying state between legs ==")
for tag, tool in (("tool 1 (trained on)", cfg.tool), ("tool 2 (never seen)", tool2())):
    legs = target_cycle(policy, tool, cfg.friction, cfg.arm, cfg.mdp,
                        protocol=EvalProtocol(), repeats=3)
    succ = float(np.mean([r["reached"] for r in legs]))
    print(f"\n{tag}: {succ:.0%} of legs reached")
    for r in legs[: len(legs) // 3]:  # one representative repeat
        status = "ok " if r["reached"] else "MISS"
        print(
            f"  -> {r['target_deg']:6.1f} deg: {status} in {r['steps']:3d} steps, "
            f"final error {np.degrees(r['final_error']):+6.2f} deg"
        )

nominal = evaluate(policy, cfg.tool, cfg.friction, cfg.arm, cfg.mdp, proto, seed=(0, 200))
print(
    f"\nnominal check: success {nominal['success_rate']:.0%} over {proto.n_episodes} "
    "episodes at 1.0x friction"
)
