"""Episodic MDP wrapper around the gripper/tool dynamics.

Observations are the tool angle error, tool velocity, gripper angle and
velocity, and finger separation.  Actions are a normalized pair in [-1, 1]^2:
gripper angular acceleration and a finger command (separation target by
default, signed rate optionally).  Reward is the negative absolute angle
error scaled by the attainable range, plus a bonus of 1 inside the goal
region (error within tolerance, tool at rest relative to the gripper, and the
tool still gripped).

Domain randomization (both optional, for sim-to-real robustness): a
per-episode multiplicative noise on the Coulomb/stiction gains, and a
per-step random actuation delay that applies the previous command for a
random fraction of the control interval, independently for the arm and the
fingers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .dynamics import (
    ArmParams,
    ControlInput,
    FrictionParams,
    SimState,
    ToolParams,
    deformation,
    integrate_step,
    net_tool_torque,
)

__all__ = [
    "MdpConfig",
    "RandomizationConfig",
    "Observation",
    "StepResult",
    "PivotingEnv",
    "goal_predicate",
]

_ENV_STREAM = 0


@dataclass(frozen=True, slots=True)
class MdpConfig:
    """Episode and reward shaping constants.

    ``goal_vel_tol`` defaults to the friction model's Karnopp window when
    left as ``None``.  ``angle_range`` is the attainable tool angle span used
    to scale the error penalty into [-1, 0].

    The 0.1 s control interval matters more than it looks: the contact is so
    overdamped that each gripper stroke pivots the tool only a fraction of a
    radian, so episodes need ~10 s of wall time for the multi-stroke
    regrasp-and-swing pattern to reach far targets within the horizon.
    """

    dt: float = 0.1
    horizon: int = 100
    discount: float = 0.99
    goal_tol: float = math.radians(3.0)
    goal_vel_tol: float | None = None
    goal_bonus: float = 1.0
    angle_range: float = math.pi
    init_target_range: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    init_grip_offset: float = 0.005
    action_mode: str = "target"
    terminate_on_goal: bool = True

    def validate(self) -> list[str]:
        errs = []
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            errs.append("dt: must be finite and > 0")
        if self.horizon < 1:
            errs.append("horizon: must be >= 1")
        if not (0.0 < self.discount < 1.0):
            errs.append("discount: must be in (0, 1)")
        if not (math.isfinite(self.goal_tol) and self.goal_tol > 0.0):
            errs.append("goal_tol: must be finite and > 0")
        if self.goal_vel_tol is not None and not (
            math.isfinite(self.goal_vel_tol) and self.goal_vel_tol > 0.0
        ):
            errs.append("goal_vel_tol: must be finite and > 0 (or null)")
        if not math.isfinite(self.goal_bonus):
            errs.append("goal_bonus: must be finite")
        if not (math.isfinite(self.angle_range) and self.angle_range > 0.0):
            errs.append("angle_range: must be finite and > 0")
        lo, hi = self.init_target_range
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            errs.append("init_target_range: must be a finite interval (lo <= hi)")
        if not (math.isfinite(self.init_grip_offset) and self.init_grip_offset >= 0.0):
            errs.append("init_grip_offset: must be finite and >= 0")
        if self.action_mode not in ("target", "rate"):
            errs.append("action_mode: must be 'target' or 'rate'")
        return errs


@dataclass(frozen=True, slots=True)
class RandomizationConfig:
    """Per-episode friction noise and per-step actuation delays.

    ``friction_noise_frac`` f draws a multiplier from U[1-f, 1+f] at reset and
    applies it to both Coulomb and stiction gains for the whole episode.
    ``delay_frac_max`` u_max delays each channel's new command by a fraction
    u ~ U[0, u_max] of the control interval, drawn per step per channel.
    """

    friction_noise_frac: float = 0.10
    delay_frac_max: float = 0.10
    friction_enabled: bool = True
    arm_delay_enabled: bool = True
    finger_delay_enabled: bool = True

    def validate(self) -> list[str]:
        errs = []
        if not (0.0 <= self.friction_noise_frac < 1.0):
            errs.append("friction_noise_frac: must be within [0, 1)")
        if not (0.0 <= self.delay_frac_max < 1.0):
            errs.append("delay_frac_max: must be within [0, 1)")
        return errs

    @classmethod
    def disabled(cls) -> "RandomizationConfig":
        return cls(friction_enabled=False, arm_delay_enabled=False, finger_delay_enabled=False)


class Observation(NamedTuple):
    """Policy-visible state, ordered as fed to the network."""

    angle_error: float
    tool_vel: float
    grp_angle: float
    grp_vel: float
    finger_dist: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


class StepResult(NamedTuple):
    obs: Observation
    reward: float
    done: bool
    info: dict


def goal_predicate(
    state: SimState, target: float, cfg: MdpConfig, tool: ToolParams
) -> bool:
    """True iff the tool is on target, at rest relative to the gripper, and gripped."""
    vel_tol = cfg.goal_vel_tol if cfg.goal_vel_tol is not None else 1e-3
    return (
        abs(state.tool_angle - target) <= cfg.goal_tol
        and abs(state.tool_vel) <= vel_tol
        and deformation(tool, state.finger_dist) > 0.0
    )


class PivotingEnv:
    """Gym-style environment over the gripper/tool dynamics.

    ``reset`` accepts an integer (or tuple-of-ints) seed; successive unseeded
    resets draw from per-episode substreams of the construction-time master
    seed, so episode i is reproducible independently of scheduling.
    """

    def __init__(
        self,
        tool: ToolParams,
        fric: FrictionParams,
        arm: ArmParams,
        mdp: MdpConfig | None = None,
        rand: RandomizationConfig | None = None,
        master_seed: int = 0,
    ):
        mdp = mdp if mdp is not None else MdpConfig()
        rand = rand if rand is not None else RandomizationConfig()
        errs = (
            [f"tool.{e}" for e in tool.validate()]
            + [f"friction.{e}" for e in fric.validate()]
            + [f"arm.{e}" for e in arm.validate()]
            + [f"mdp.{e}" for e in mdp.validate()]
            + [f"randomization.{e}" for e in rand.validate()]
        )
        if arm.finger_min >= tool.rest_finger_distance:
            errs.append("arm.finger_min: must be < tool.rest_finger_distance")
        if mdp.init_grip_offset > tool.rest_finger_distance - arm.finger_min:
            errs.append("mdp.init_grip_offset: exceeds the commandable squeeze range")
        if errs:
            raise ValueError("invalid environment parameters: " + "; ".join(errs))

        self.tool = tool
        self.nominal_fric = fric
        self.arm = arm
        self.mdp = mdp
        self.rand = rand
        self._master_seed = master_seed
        self._episode_idx = 0
        goal_vel_tol = mdp.goal_vel_tol if mdp.goal_vel_tol is not None else fric.stiction_eps
        self._goal_mdp = replace(mdp, goal_vel_tol=goal_vel_tol)

        self._fric = fric
        self._rng: np.random.Generator | None = None
        self._state: SimState | None = None
        self._target = 0.0
        self._steps = 0
        self._done = True
        self._prev_control: ControlInput | None = None

    # -- inspection ---------------------------------------------------------

    @property
    def state(self) -> SimState:
        if self._state is None:
            raise RuntimeError("environment not reset")
        return self._state

    @property
    def target_angle(self) -> float:
        return self._target

    @property
    def episode_fric(self) -> FrictionParams:
        return self._fric

    @property
    def steps(self) -> int:
        return self._steps

    @property
    def done(self) -> bool:
        return self._done

    def observation(self) -> Observation:
        s = self.state
        return Observation(
            s.tool_angle - self._target, s.tool_vel, s.grp_angle, s.grp_vel, s.finger_dist
        )

    # -- episode control ----------------------------------------------------

    def reset(
        self,
        seed: int | tuple[int, ...] | None = None,
        init_angle: float | None = None,
        target_angle: float | None = None,
    ) -> Observation:
        if seed is not None:
            entropy = seed
        else:
            entropy = (self._master_seed, self._episode_idx, _ENV_STREAM)
        self._episode_idx += 1
        self._rng = np.random.default_rng(entropy)

        lo, hi = self.mdp.init_target_range
        if init_angle is None:
            init_angle = float(self._rng.uniform(lo, hi))
        elif not (lo <= init_angle <= hi):
            raise ValueError(f"init_angle {init_angle!r} outside {(lo, hi)!r}")
        if target_angle is None:
            target_angle = float(self._rng.uniform(lo, hi))
        elif not (lo <= target_angle <= hi):
            raise ValueError(f"target_angle {target_angle!r} outside {(lo, hi)!r}")

        fric = self.nominal_fric
        if self.rand.friction_enabled and self.rand.friction_noise_frac > 0.0:
            f = self.rand.friction_noise_frac
            m = float(self._rng.uniform(1.0 - f, 1.0 + f))
            fric = replace(
                fric,
                coulomb_stiffness=fric.coulomb_stiffness * m,
                static_stiffness=fric.static_stiffness * m,
            )
        self._fric = fric

        grip = self.tool.rest_finger_distance - self.mdp.init_grip_offset
        self._state = SimState(0.0, 0.0, float(init_angle), 0.0, grip)
        self._target = float(target_angle)
        self._steps = 0
        self._done = False
        if self.mdp.action_mode == "target":
            self._prev_control = ControlInput(0.0, grip, "target")
        else:
            self._prev_control = ControlInput(0.0, 0.0, "rate")
        return self.observation()

    def _as_control(self, action) -> ControlInput:
        if isinstance(action, ControlInput):
            return action
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (2,):
            raise ValueError(f"action must have shape (2,), got {a.shape}")
        acc = float(min(max(a[0], -1.0), 1.0)) * self.arm.accel_limit
        f = float(min(max(a[1], -1.0), 1.0))
        if self.mdp.action_mode == "target":
            d0 = self.tool.rest_finger_distance
            fmin = self.arm.finger_min
            return ControlInput(acc, fmin + 0.5 * (f + 1.0) * (d0 - fmin), "target")
        return ControlInput(acc, f, "rate")

    def step(self, action) -> StepResult:
        if self._state is None:
            raise RuntimeError("environment not reset")
        if self._done:
            raise RuntimeError("step() called after episode end; call reset()")
        control = self._as_control(action)
        dt = self.mdp.dt

        arm_delay = 0.0
        fing_delay = 0.0
        if self.rand.arm_delay_enabled and self.rand.delay_frac_max > 0.0:
            arm_delay = float(self._rng.uniform(0.0, self.rand.delay_frac_max)) * dt
        if self.rand.finger_delay_enabled and self.rand.delay_frac_max > 0.0:
            fing_delay = float(self._rng.uniform(0.0, self.rand.delay_frac_max)) * dt

        prev = self._prev_control
        state = self._state
        # piecewise-constant control: each channel switches from the previous
        # command to the new one after its own delay
        bounds = sorted({0.0, arm_delay, fing_delay, dt})
        for t0, t1 in zip(bounds[:-1], bounds[1:]):
            if t1 <= t0:
                continue
            seg = ControlInput(
                control.grp_accel if t0 >= arm_delay else prev.grp_accel,
                control.finger_cmd if t0 >= fing_delay else prev.finger_cmd,
                control.finger_mode,
            )
            state = integrate_step(state, seg, t1 - t0, self.tool, self.arm, self._fric)
        self._state = state
        self._prev_control = control
        self._steps += 1

        err = state.tool_angle - self._target
        reward = -abs(err) / self.mdp.angle_range
        goal = goal_predicate(state, self._target, self._goal_mdp, self.tool)
        if goal:
            reward += self.mdp.goal_bonus
        done = (goal and self.mdp.terminate_on_goal) or self._steps >= self.mdp.horizon
        self._done = done

        tau_net = net_tool_torque(state, 0.0, self.tool, self.arm)
        stuck = (
            abs(state.tool_vel) <= self._fric.stiction_eps
            and abs(tau_net)
            <= self._fric.static_stiffness * deformation(self.tool, state.finger_dist)
        )
        info = {
            "goal_reached": goal,
            "stick": stuck,
            "applied_delay": arm_delay,
            "finger_delay": fing_delay,
        }
        return StepResult(self.observation(), float(reward), done, info)
