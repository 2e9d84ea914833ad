"""Planar rigid-body model of a two-link gripper/tool pair with grip-controlled friction.

The first link is a position-controlled gripper joint driven by a commanded
angular acceleration; the second link is an unactuated tool held between the
gripper fingers.  The only torque the fingers exert on the tool is friction at
the contact patch, and the normal force behind that friction is set by how far
the compliant fingertips are squeezed past first contact.  Squeezing harder
locks the tool to the gripper; releasing lets it swing on its pivot.

Friction at the contact combines viscous drag, Coulomb friction, and stiction
with a Karnopp zero-velocity window: inside a small velocity band the contact
is treated as stuck whenever static friction can balance the net torque on the
tool, which removes the sign-chatter a pure signum model produces at rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ToolParams",
    "FrictionParams",
    "ArmParams",
    "SimState",
    "ControlInput",
    "deformation",
    "net_tool_torque",
    "friction_torque",
    "tool_accel",
    "integrate_step",
]


@dataclass(frozen=True, slots=True)
class ToolParams:
    """Inertial and contact-geometry constants of a grasped tool.

    Attributes
    ----------
    inertia : float
        Moment of inertia about the tool's own center of mass [kg m^2].
    mass : float
        Tool mass [kg].
    com_distance : float
        Distance from the finger pivot to the tool center of mass [m].
    rest_finger_distance : float
        Finger separation at which the fingertips just touch the tool with
        zero squeeze [m]; smaller separations deform the fingertips.
    """

    inertia: float
    mass: float
    com_distance: float
    rest_finger_distance: float

    @property
    def pivot_inertia(self) -> float:
        """Moment of inertia about the pivot (parallel-axis theorem)."""
        return self.inertia + self.mass * self.com_distance**2

    def validate(self) -> list[str]:
        errs = []
        if not (math.isfinite(self.inertia) and self.inertia > 0.0):
            errs.append("inertia: must be finite and > 0")
        if not (math.isfinite(self.mass) and self.mass > 0.0):
            errs.append("mass: must be finite and > 0")
        if not (math.isfinite(self.com_distance) and self.com_distance > 0.0):
            errs.append("com_distance: must be finite and > 0")
        if not (
            math.isfinite(self.rest_finger_distance)
            and self.rest_finger_distance > 0.0
        ):
            errs.append("rest_finger_distance: must be finite and > 0")
        return errs


@dataclass(frozen=True, slots=True)
class FrictionParams:
    """Contact friction model constants.

    The normal force is never materialized on its own: the fingertip stiffness
    k and the friction coefficients only ever appear through the composite
    torque-per-deformation gains below.

    Attributes
    ----------
    viscous : float
        Viscous drag gain on tool angular velocity [N m s/rad].
    coulomb_stiffness : float
        Kinetic Coulomb torque per meter of fingertip deformation [N m/m].
    static_stiffness : float
        Breakaway (stiction) torque per meter of deformation [N m/m].
        Defaults to ``coulomb_stiffness`` when not given.
    stiction_eps : float
        Half-width of the Karnopp zero-velocity window [rad/s].
    """

    viscous: float
    coulomb_stiffness: float
    static_stiffness: float | None = None
    stiction_eps: float = 1e-3

    def __post_init__(self):
        if self.static_stiffness is None:
            object.__setattr__(self, "static_stiffness", self.coulomb_stiffness)

    def validate(self) -> list[str]:
        errs = []
        if not (math.isfinite(self.viscous) and self.viscous >= 0.0):
            errs.append("viscous: must be finite and >= 0")
        if not (math.isfinite(self.coulomb_stiffness) and self.coulomb_stiffness >= 0.0):
            errs.append("coulomb_stiffness: must be finite and >= 0")
        if not (math.isfinite(self.static_stiffness) and self.static_stiffness >= 0.0):
            errs.append("static_stiffness: must be finite and >= 0")
        elif self.static_stiffness < self.coulomb_stiffness:
            errs.append("static_stiffness: must be >= coulomb_stiffness")
        if not (math.isfinite(self.stiction_eps) and self.stiction_eps > 0.0):
            errs.append("stiction_eps: must be finite and > 0")
        return errs


@dataclass(frozen=True, slots=True)
class ArmParams:
    """Arm-side constants: geometry, gravity, and actuator limits.

    Attributes
    ----------
    link_length : float
        Distance from the arm joint to the finger pivot [m].
    gravity : float
        Gravitational acceleration in the motion plane [m/s^2]; 0 for a
        horizontal plane.
    accel_limit : float
        Symmetric clamp on the commanded gripper angular acceleration [rad/s^2].
    grp_angle_range : tuple[float, float]
        Reachable gripper joint interval [rad]; the joint velocity is zeroed
        when the position clamps at either end.
    finger_min : float
        Smallest commandable finger separation [m].
    finger_slew : float
        Maximum finger separation rate [m/s].
    """

    link_length: float
    gravity: float = 0.0
    accel_limit: float = 20.0
    grp_angle_range: tuple[float, float] = (-math.pi, math.pi)
    finger_min: float = 0.008
    finger_slew: float = 0.04

    def validate(self) -> list[str]:
        errs = []
        if not (math.isfinite(self.link_length) and self.link_length > 0.0):
            errs.append("link_length: must be finite and > 0")
        if not (math.isfinite(self.gravity) and 0.0 <= self.gravity <= 9.81):
            errs.append("gravity: must be within [0, 9.81]")
        if not (math.isfinite(self.accel_limit) and self.accel_limit > 0.0):
            errs.append("accel_limit: must be finite and > 0")
        lo, hi = self.grp_angle_range
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            errs.append("grp_angle_range: must be a finite interval (lo < hi)")
        if not (math.isfinite(self.finger_min) and self.finger_min >= 0.0):
            errs.append("finger_min: must be finite and >= 0")
        if not (math.isfinite(self.finger_slew) and self.finger_slew > 0.0):
            errs.append("finger_slew: must be finite and > 0")
        return errs


@dataclass(frozen=True, slots=True)
class SimState:
    """Full mechanical state of the gripper/tool pair.

    ``tool_angle``/``tool_vel`` are the tool's angle and angular velocity
    relative to the gripper link, so a stuck contact means ``tool_vel == 0``
    while the gripper itself may still move.
    """

    grp_angle: float
    grp_vel: float
    tool_angle: float
    tool_vel: float
    finger_dist: float


@dataclass(frozen=True, slots=True)
class ControlInput:
    """One control interval's command.

    ``grp_accel`` is the commanded gripper angular acceleration [rad/s^2]
    (clamped to the actuator limit).  ``finger_cmd`` is either a target finger
    separation [m] (``finger_mode == "target"``) or a signed rate fraction in
    [-1, 1] of the slew limit (``finger_mode == "rate"``).
    """

    grp_accel: float
    finger_cmd: float
    finger_mode: str = "target"


def deformation(tool: ToolParams, finger_dist: float, tol: float = 1e-9) -> float:
    """Fingertip deformation [m] at a given finger separation.

    Zero at or beyond the rest separation; separations above rest by more than
    ``tol`` indicate a broken grasp model and raise ``ValueError``.
    """
    d = tool.rest_finger_distance - finger_dist
    if d < -tol:
        raise ValueError(
            f"finger_dist {finger_dist!r} exceeds rest separation "
            f"{tool.rest_finger_distance!r}"
        )
    return d if d > 0.0 else 0.0


def net_tool_torque(
    state: SimState, grp_accel: float, tool: ToolParams, arm: ArmParams
) -> float:
    """Net non-friction torque on the tool about its pivot [N m].

    Sum of the inertial reaction to gripper acceleration, the centrifugal
    term from gripper rotation, and gravity.  This is the torque stiction has
    to balance for the tool to stay at rest relative to the gripper.
    """
    mlr = tool.mass * arm.link_length * tool.com_distance
    coupled = tool.pivot_inertia + mlr * math.cos(state.tool_angle)
    tau = -coupled * grp_accel - mlr * math.sin(state.tool_angle) * state.grp_vel**2
    if arm.gravity != 0.0:
        tau -= (
            tool.mass
            * arm.gravity
            * tool.com_distance
            * math.cos(state.grp_angle + state.tool_angle)
        )
    return tau


def friction_torque(
    state: SimState, tau_net: float, tool: ToolParams, fric: FrictionParams
) -> tuple[float, bool]:
    """Contact friction torque [N m] and whether the contact is stuck.

    Inside the Karnopp window (|tool_vel| <= stiction_eps) the contact sticks
    whenever the net torque is within the breakaway threshold, and the
    friction torque then equals the net torque it balances.  Otherwise the
    kinetic law applies: viscous drag plus deformation-scaled Coulomb torque
    opposing the sliding direction (or the impending direction at breakaway).
    """
    defm = deformation(tool, state.finger_dist)
    if abs(state.tool_vel) <= fric.stiction_eps:
        if abs(tau_net) <= fric.static_stiffness * defm:
            return tau_net, True
        sgn = math.copysign(1.0, tau_net)
    else:
        sgn = math.copysign(1.0, state.tool_vel)
    return -fric.viscous * state.tool_vel - fric.coulomb_stiffness * defm * sgn, False


def tool_accel(
    state: SimState,
    grp_accel: float,
    tool: ToolParams,
    arm: ArmParams,
    fric: FrictionParams,
) -> tuple[float, bool]:
    """Tool angular acceleration [rad/s^2] and the stick flag.

    Exactly zero while the contact sticks; otherwise the net of friction and
    non-friction torques divided by the pivot inertia.
    """
    tau_net = net_tool_torque(state, grp_accel, tool, arm)
    tau_f, stuck = friction_torque(state, tau_net, tool, fric)
    if stuck:
        return 0.0, True
    return (tau_f + tau_net) / tool.pivot_inertia, False


def integrate_step(
    state: SimState,
    control: ControlInput,
    dt: float,
    tool: ToolParams,
    arm: ArmParams,
    fric: FrictionParams,
) -> SimState:
    """Advance the state by ``dt`` under one constant control input.

    Semi-implicit Euler: velocities first, then positions from the new
    velocities.  Two regularizations keep the explicit update well-posed at
    practical step sizes:

    * the step is subdivided so the viscous rate ``viscous/pivot_inertia``
      per substep stays below 0.5 (the explicit update is unstable past 2);
    * the kinetic Coulomb impulse within a substep is capped at the zero
      crossing, so a braking contact stops instead of ringing sign-to-sign.
      Away from a crossing this is exactly the explicit signum law.

    Sticking freezes ``tool_angle`` and zeroes ``tool_vel``; the gripper angle
    clamps to its range with the joint velocity zeroed at the limit.  Raises
    ``ValueError`` on a non-positive ``dt`` or a non-finite result.
    """
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError(f"dt must be positive and finite, got {dt!r}")

    ip = tool.pivot_inertia
    mlr = tool.mass * arm.link_length * tool.com_distance
    mgr = tool.mass * arm.gravity * tool.com_distance
    mu_v = fric.viscous
    k_coul = fric.coulomb_stiffness
    k_stat = fric.static_stiffness
    eps = fric.stiction_eps
    lo, hi = arm.grp_angle_range
    d0 = tool.rest_finger_distance
    fmin = arm.finger_min
    slew = arm.finger_slew

    grp_accel = min(max(control.grp_accel, -arm.accel_limit), arm.accel_limit)
    if control.finger_mode == "target":
        fd_target = min(max(control.finger_cmd, fmin), d0)
        fd_rate = None
    elif control.finger_mode == "rate":
        fd_target = None
        fd_rate = min(max(control.finger_cmd, -1.0), 1.0) * slew
    else:
        raise ValueError(f"unknown finger_mode {control.finger_mode!r}")

    n_sub = max(1, math.ceil(2.0 * (mu_v / ip) * dt))
    h = dt / n_sub

    g_ang = state.grp_angle
    g_vel = state.grp_vel
    t_ang = state.tool_angle
    t_vel = state.tool_vel
    fd = state.finger_dist

    for _ in range(n_sub):
        # fingers move first, bounded by the slew limit
        if fd_target is not None:
            step_max = slew * h
            delta = fd_target - fd
            if delta > step_max:
                delta = step_max
            elif delta < -step_max:
                delta = -step_max
            fd += delta
        else:
            fd = min(max(fd + fd_rate * h, fmin), d0)
        defm = d0 - fd
        if defm < 0.0:
            defm = 0.0

        # gripper pinned at a range limit produces no inertial reaction
        ga = grp_accel
        if g_vel == 0.0 and ((g_ang >= hi and ga > 0.0) or (g_ang <= lo and ga < 0.0)):
            ga = 0.0

        tau_net = -(ip + mlr * math.cos(t_ang)) * ga - mlr * math.sin(t_ang) * g_vel * g_vel
        if mgr != 0.0:
            tau_net -= mgr * math.cos(g_ang + t_ang)

        if abs(t_vel) <= eps and abs(tau_net) <= k_stat * defm:
            t_vel = 0.0  # stuck: stiction balances the net torque
        else:
            v_star = t_vel + h * (tau_net - mu_v * t_vel) / ip
            dv_c = h * k_coul * defm / ip
            if abs(v_star) <= dv_c:
                t_vel = 0.0  # Coulomb impulse absorbs the remaining momentum
            else:
                t_vel = v_star - math.copysign(dv_c, v_star)
            t_ang += t_vel * h

        g_vel += ga * h
        g_ang += g_vel * h
        if g_ang >= hi:
            g_ang = hi
            if g_vel > 0.0:
                g_vel = 0.0
        elif g_ang <= lo:
            g_ang = lo
            if g_vel < 0.0:
                g_vel = 0.0

    out = SimState(g_ang, g_vel, t_ang, t_vel, fd)
    if not (
        math.isfinite(g_ang)
        and math.isfinite(g_vel)
        and math.isfinite(t_ang)
        and math.isfinite(t_vel)
        and math.isfinite(fd)
    ):
        raise ValueError(f"non-finite state after integrate_step: {out}")
    return out
