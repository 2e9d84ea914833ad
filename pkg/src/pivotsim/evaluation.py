"""Evaluation protocols: fixed-seed eval batches, friction sweeps, target
cycles, and single-trajectory CSV dumps.

Evaluation always runs on a nominal environment (randomization disabled) so
that metrics isolate the policy; robustness is probed explicitly by scaling
the Coulomb/stiction gains through the sweep multipliers.  By default the
policy is evaluated with its mean action (no exploration noise).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import ArmParams, FrictionParams, ToolParams
from .environment import MdpConfig, PivotingEnv, RandomizationConfig
from .policy import PolicyParams, forward_mean, sample_action

__all__ = [
    "EvalProtocol",
    "SweepSpec",
    "CycleSpec",
    "evaluate",
    "friction_sweep",
    "target_cycle",
    "dump_trajectory",
]

_ENV_STREAM = 0
_ACTION_STREAM = 1


@dataclass(frozen=True, slots=True)
class EvalProtocol:
    """How to run one evaluation batch."""

    n_episodes: int = 100
    step_cap: int = 250
    eval_angle_range: tuple[float, float] = (-math.pi / 2.5, math.pi / 2.5)
    goal_tol: float = math.radians(3.0)
    deterministic_policy: bool = True

    def validate(self) -> list[str]:
        errs = []
        if self.n_episodes < 1:
            errs.append("n_episodes: must be >= 1")
        if self.step_cap < 1:
            errs.append("step_cap: must be >= 1")
        lo, hi = self.eval_angle_range
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            errs.append("eval_angle_range: must be a finite interval (lo <= hi)")
        if not (math.isfinite(self.goal_tol) and self.goal_tol > 0.0):
            errs.append("goal_tol: must be finite and > 0")
        return errs


@dataclass(frozen=True, slots=True)
class SweepSpec:
    """Friction-mismatch sweep: evaluate at scaled Coulomb/stiction gains."""

    friction_multipliers: tuple[float, ...] = (0.25, 0.5, 1.0, 2.5, 5.0)
    episodes_per_point: int = 100

    def validate(self) -> list[str]:
        errs = []
        if not self.friction_multipliers or any(m <= 0.0 for m in self.friction_multipliers):
            errs.append("friction_multipliers: must be a nonempty list of positives")
        if self.episodes_per_point < 1:
            errs.append("episodes_per_point: must be >= 1")
        return errs


@dataclass(frozen=True, slots=True)
class CycleSpec:
    """Sequential target cycle carrying the final tool angle between legs."""

    targets_deg: tuple[float, ...] = (45.0, 0.0, -60.0, 30.0, 5.0, 0.0)
    start_deg: float = 0.0

    def validate(self) -> list[str]:
        if not self.targets_deg:
            return ["targets_deg: must be a nonempty list"]
        return []


def _eval_env(
    tool: ToolParams,
    fric: FrictionParams,
    arm: ArmParams,
    mdp: MdpConfig,
    protocol: EvalProtocol,
    friction_multiplier: float = 1.0,
    angle_range: tuple[float, float] | None = None,
) -> PivotingEnv:
    fric_eval = replace(
        fric,
        coulomb_stiffness=fric.coulomb_stiffness * friction_multiplier,
        static_stiffness=fric.static_stiffness * friction_multiplier,
    )
    mdp_eval = replace(
        mdp,
        horizon=protocol.step_cap,
        goal_tol=protocol.goal_tol,
        init_target_range=angle_range if angle_range is not None else protocol.eval_angle_range,
    )
    return PivotingEnv(tool, fric_eval, arm, mdp_eval, RandomizationConfig.disabled())


def _run_eval_episode(
    env: PivotingEnv,
    params: PolicyParams,
    env_seed,
    action_seed,
    deterministic: bool,
    init_angle: float | None = None,
    target_angle: float | None = None,
    recorder=None,
):
    obs = env.reset(seed=env_seed, init_angle=init_angle, target_angle=target_angle)
    rng = None if deterministic else np.random.default_rng(action_seed)
    if recorder is not None:
        recorder(0, env, 0.0)
    total = 0.0
    reached = False
    done = False
    t = 0
    while not done:
        o = obs.as_array()
        if deterministic:
            a = forward_mean(params, o)
        else:
            a, _ = sample_action(params, o, rng)
        obs, reward, done, info = env.step(a)
        t += 1
        total += reward
        if info["goal_reached"]:
            reached = True
        if recorder is not None:
            recorder(t, env, reward)
    return total, t, reached


def evaluate(
    params: PolicyParams,
    tool: ToolParams,
    fric: FrictionParams,
    arm: ArmParams,
    mdp: MdpConfig,
    protocol: EvalProtocol | None = None,
    seed: int = 0,
    friction_multiplier: float = 1.0,
) -> dict:
    """Run an evaluation batch; returns aggregate metrics.

    Episodes that never reach the goal count ``step_cap`` toward
    ``avg_steps_to_goal``.
    """
    protocol = protocol if protocol is not None else EvalProtocol()
    env = _eval_env(tool, fric, arm, mdp, protocol, friction_multiplier)
    totals, steps, reached_l = [], [], []
    for i in range(protocol.n_episodes):
        total, t, reached = _run_eval_episode(
            env,
            params,
            (seed, i, _ENV_STREAM),
            (seed, i, _ACTION_STREAM),
            protocol.deterministic_policy,
        )
        totals.append(total)
        steps.append(t if reached else protocol.step_cap)
        reached_l.append(reached)
    return {
        "n_episodes": protocol.n_episodes,
        "avg_reward": float(np.mean(totals)),
        "avg_steps_to_goal": float(np.mean(steps)),
        "success_rate": float(np.mean(reached_l)),
    }


def friction_sweep(
    params: PolicyParams,
    tool: ToolParams,
    fric: FrictionParams,
    arm: ArmParams,
    mdp: MdpConfig,
    protocol: EvalProtocol | None = None,
    sweep: SweepSpec | None = None,
    seed: int = 0,
) -> list[dict]:
    """Evaluate at each friction multiplier with a shared seed; one row per
    multiplier."""
    protocol = protocol if protocol is not None else EvalProtocol()
    sweep = sweep if sweep is not None else SweepSpec()
    protocol = replace(protocol, n_episodes=sweep.episodes_per_point)
    rows = []
    for m in sweep.friction_multipliers:
        metrics = evaluate(params, tool, fric, arm, mdp, protocol, seed, friction_multiplier=m)
        row = {"multiplier": float(m)}
        row.update(metrics)
        rows.append(row)
    return rows


def target_cycle(
    params: PolicyParams,
    tool: ToolParams,
    fric: FrictionParams,
    arm: ArmParams,
    mdp: MdpConfig,
    protocol: EvalProtocol | None = None,
    cycle: CycleSpec | None = None,
    seed: int = 0,
    repeats: int = 1,
) -> list[dict]:
    """Run the target sequence, carrying each leg's final tool angle into the
    next leg; one row per leg."""
    protocol = protocol if protocol is not None else EvalProtocol()
    cycle = cycle if cycle is not None else CycleSpec()
    env = _eval_env(tool, fric, arm, mdp, protocol, angle_range=(-math.pi, math.pi))
    angle = math.radians(cycle.start_deg)
    rows = []
    leg = 0
    for _ in range(repeats):
        for tgt_deg in cycle.targets_deg:
            target = math.radians(tgt_deg)
            total, t, reached = _run_eval_episode(
                env,
                params,
                (seed, leg, _ENV_STREAM),
                (seed, leg, _ACTION_STREAM),
                protocol.deterministic_policy,
                init_angle=angle,
                target_angle=target,
            )
            angle = env.state.tool_angle
            rows.append(
                {
                    "target_deg": float(tgt_deg),
                    "reached": bool(reached),
                    "steps": int(t),
                    "final_error": float(angle - target),
                }
            )
            leg += 1
    return rows


def dump_trajectory(
    params: PolicyParams,
    tool: ToolParams,
    fric: FrictionParams,
    arm: ArmParams,
    mdp: MdpConfig,
    init_angle: float,
    target_angle: float,
    path: str,
    protocol: EvalProtocol | None = None,
    seed: int = 0,
) -> str:
    """Roll out one episode and write a per-step CSV (plus a t=0 row for the
    initial state, with reward 0).  Returns ``path``."""
    protocol = protocol if protocol is not None else EvalProtocol()
    env = _eval_env(tool, fric, arm, mdp, protocol, angle_range=(-math.pi, math.pi))
    rows = []

    def record(t, env_, reward):
        s = env_.state
        rows.append(
            [
                t,
                s.tool_angle,
                env_.target_angle,
                s.tool_angle - env_.target_angle,
                s.grp_angle,
                s.grp_vel,
                s.finger_dist,
                reward,
            ]
        )

    _run_eval_episode(
        env,
        params,
        (seed, 0, _ENV_STREAM),
        (seed, 0, _ACTION_STREAM),
        protocol.deterministic_policy,
        init_angle=init_angle,
        target_angle=target_angle,
        recorder=record,
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "tool_angle", "target", "angle_error", "grp_angle", "grp_vel", "finger_dist", "reward"]
        )
        writer.writerows(rows)
    return path
