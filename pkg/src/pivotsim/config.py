"""Run configuration: defaults, tool presets, JSON round-trip, validation.

A run config is a single JSON document with named sections (tool, friction,
arm, mdp, randomization, policy, trpo, eval, sweep, cycle) plus top-level run
controls.  Every run writes its fully resolved config next to its outputs;
re-running from that file reproduces the run bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, replace

from .dynamics import ArmParams, FrictionParams, ToolParams
from .environment import MdpConfig, RandomizationConfig
from .evaluation import CycleSpec, EvalProtocol, SweepSpec
from .policy import MlpSpec
from .trpo import TrpoConfig

__all__ = [
    "ConfigError",
    "RunConfig",
    "TOOL_PRESETS",
    "tool1",
    "tool2",
    "default_friction",
    "default_config",
    "config_to_dict",
    "config_from_dict",
    "load_config",
    "dump_config",
]

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending keys."""


def tool1() -> ToolParams:
    """Bundled reference tool 1 (long T-handle)."""
    return ToolParams(
        inertia=0.00006943, mass=0.026, com_distance=0.089, rest_finger_distance=0.0188
    )


def tool2() -> ToolParams:
    """Bundled reference tool 2 (short knurled handle)."""
    return ToolParams(
        inertia=0.0001111, mass=0.033, com_distance=0.1, rest_finger_distance=0.0162
    )


TOOL_PRESETS = {"tool1": tool1, "tool2": tool2}


def default_friction() -> FrictionParams:
    """Identified contact friction for tool 1 (also reused for tool 2,
    whose contact was never separately identified)."""
    return FrictionParams(viscous=0.066, coulomb_stiffness=9.906)


def default_arm() -> ArmParams:
    return ArmParams(link_length=0.35)


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Everything a training or evaluation run needs."""

    tool: ToolParams
    friction: FrictionParams
    arm: ArmParams
    mdp: MdpConfig
    randomization: RandomizationConfig
    policy: MlpSpec
    trpo: TrpoConfig
    eval: EvalProtocol
    sweep: SweepSpec
    cycle: CycleSpec
    master_seed: int = 0
    output_dir: str = "pivot_run"
    iterations: int = 500
    checkpoint_every: int = 50
    eval_every: int = 10
    target_success: float | None = None
    workers: int = 1

    def validate(self) -> None:
        errs = []
        errs += [f"tool.{e}" for e in self.tool.validate()]
        errs += [f"friction.{e}" for e in self.friction.validate()]
        errs += [f"arm.{e}" for e in self.arm.validate()]
        errs += [f"mdp.{e}" for e in self.mdp.validate()]
        errs += [f"randomization.{e}" for e in self.randomization.validate()]
        errs += [f"policy.{e}" for e in self.policy.validate()]
        errs += [f"trpo.{e}" for e in self.trpo.validate()]
        errs += [f"eval.{e}" for e in self.eval.validate()]
        errs += [f"sweep.{e}" for e in self.sweep.validate()]
        errs += [f"cycle.{e}" for e in self.cycle.validate()]
        if self.arm.finger_min >= self.tool.rest_finger_distance:
            errs.append("arm.finger_min: must be < tool.rest_finger_distance")
        if self.policy.layer_sizes and self.policy.layer_sizes[0] != 5:
            errs.append("policy.layer_sizes: first size must be 5 (observation dimension)")
        if self.policy.layer_sizes and self.policy.layer_sizes[-1] != 2:
            errs.append("policy.layer_sizes: last size must be 2 (action dimension)")
        if self.master_seed < 0:
            errs.append("master_seed: must be >= 0")
        if self.iterations < 1:
            errs.append("iterations: must be >= 1")
        if self.checkpoint_every < 0:
            errs.append("checkpoint_every: must be >= 0")
        if self.eval_every < 0:
            errs.append("eval_every: must be >= 0")
        if self.target_success is not None and not (0.0 < self.target_success <= 1.0):
            errs.append("target_success: must be in (0, 1] or null")
        if self.workers < 1:
            errs.append("workers: must be >= 1")
        if errs:
            raise ConfigError("invalid config: " + "; ".join(errs))


def default_config() -> RunConfig:
    return RunConfig(
        tool=tool1(),
        friction=default_friction(),
        arm=default_arm(),
        mdp=MdpConfig(),
        randomization=RandomizationConfig(),
        policy=MlpSpec(),
        trpo=TrpoConfig(),
        eval=EvalProtocol(),
        sweep=SweepSpec(),
        cycle=CycleSpec(),
    )


_SECTIONS = {
    "tool": ToolParams,
    "friction": FrictionParams,
    "arm": ArmParams,
    "mdp": MdpConfig,
    "randomization": RandomizationConfig,
    "policy": MlpSpec,
    "trpo": TrpoConfig,
    "eval": EvalProtocol,
    "sweep": SweepSpec,
    "cycle": CycleSpec,
}

_TOP_KEYS = (
    "master_seed",
    "output_dir",
    "iterations",
    "checkpoint_every",
    "eval_every",
    "target_success",
    "workers",
)

# fields whose JSON representation is a list but whose dataclass type is a tuple
_TUPLE_FIELDS = {
    "grp_angle_range",
    "init_target_range",
    "eval_angle_range",
    "layer_sizes",
    "friction_multipliers",
    "targets_deg",
}


def config_to_dict(cfg: RunConfig) -> dict:
    out = {"tool_preset": None}
    for name in _SECTIONS:
        section = getattr(cfg, name)
        d = {}
        for f in dataclasses.fields(section):
            v = getattr(section, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        out[name] = d
    for key in _TOP_KEYS:
        out[key] = getattr(cfg, key)
    return out


def _coerce_section(name: str, cls, data: dict, base) -> object:
    if not isinstance(data, dict):
        raise ConfigError(f"invalid config: {name}: must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    updates = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"invalid config: {name}.{key}: unknown key")
        if key in _TUPLE_FIELDS:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"invalid config: {name}.{key}: must be a list")
            value = tuple(value)
        updates[key] = value
    # stiction follows the Coulomb gain unless pinned explicitly
    if cls is FrictionParams and "coulomb_stiffness" in updates and "static_stiffness" not in updates:
        updates["static_stiffness"] = None
    try:
        return replace(base, **updates)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid config: {name}: {e}") from e


def config_from_dict(data: dict) -> RunConfig:
    """Build a config on top of the defaults; unknown keys are rejected with
    their full path."""
    if not isinstance(data, dict):
        raise ConfigError("invalid config: top level must be an object")
    cfg = default_config()

    preset = data.get("tool_preset")
    if preset is not None:
        if preset not in TOOL_PRESETS:
            raise ConfigError(
                f"invalid config: tool_preset: unknown preset {preset!r} "
                f"(choose from {sorted(TOOL_PRESETS)})"
            )
        cfg = replace(cfg, tool=TOOL_PRESETS[preset]())
        if preset == "tool2":
            logger.warning(
                "tool2 preset reuses tool1 friction values; tool2 contact "
                "friction was never separately identified"
            )

    for key, value in data.items():
        if key == "tool_preset":
            continue
        if key in _SECTIONS:
            section = _coerce_section(key, _SECTIONS[key], value, getattr(cfg, key))
            cfg = replace(cfg, **{key: section})
        elif key in _TOP_KEYS:
            cfg = replace(cfg, **{key: value})
        else:
            raise ConfigError(f"invalid config: {key}: unknown key")
    cfg.validate()
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path!r} is not valid JSON: {e}") from e
    return config_from_dict(data)


def dump_config(cfg: RunConfig, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
