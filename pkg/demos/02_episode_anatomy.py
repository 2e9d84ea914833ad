"""One environment episode, driven by a hand-written ratchet controller.

No learning here -- the point is to show what a successful strategy has to
look like mechanically, and what the observation/reward stream looks like.

The target is an angle of the tool *relative to the gripper*, and stiction
freezes exactly that relative angle.  So squeezing and swinging the arm moves
nothing that matters: the tool rides along, the error stays put.  Relative
motion only happens while the contact slips, which takes a nearly open grip
(the breakaway torque is proportional to fingertip deformation), and the
contact is so overdamped that the slip velocity tracks the gripper's
acceleration quasi-statically.  Hence the ratchet the trained policies
rediscover:

  1. open the grip and accelerate -> the tool slips opposite the stroke;
  2. close the grip and swing back -> the relative angle is frozen;
  3. repeat, then clamp down near the target.

Below, a deliberately naive tight-grip controller goes nowhere, and a crude
bang-bang ratchet closes most of a 50 degree error in a few strokes.
"""

from dataclasses import replace

import numpy as np

from pivotsim.config import default_config
from pivotsim.environment import PivotingEnv, RandomizationConfig

cfg = default_config()
# hand-written controllers are wasteful, so give this demo a longer episode
# than the standard 100-step training horizon
mdp = replace(cfg.mdp, horizon=160)
env = PivotingEnv(cfg.tool, cfg.friction, cfg.arm, mdp, RandomizationConfig.disabled())

# -- controller 1: squeeze hard and wave the arm ------------------------------

obs = env.reset(seed=7, init_angle=0.0, target_angle=np.radians(-50.0))
print("observation layout: [angle_error, tool_vel, grp_angle, grp_vel, finger_dist]")
print(f"initial obs: {np.array2string(np.asarray(obs), precision=4)}")

err0 = obs[0]
for k in range(mdp.horizon):
    swing = 1.0 if (k // 8) % 2 == 0 else -1.0
    res = env.step(np.array([swing, -1.0]))  # full squeeze the whole time
    if res.done:
        break
print(
    f"\ntight-grip waving for {k + 1} steps: error {np.degrees(err0):+.1f} -> "
    f"{np.degrees(res.obs[0]):+.1f} deg.  Stiction froze the relative angle; "
    "the tool just rode along."
)

# -- controller 2: the ratchet -------------------------------------------------
#
# Because the slip is quasi-static, its direction follows the gripper's
# *acceleration*, not its velocity.  So a 16-step cycle works: accelerate one
# way with the grip open (tool slips toward the target), then clamp down and
# decelerate/reverse (error frozen), then open up for the tail of the return
# stroke, which accelerates the same way again.  Net gripper travel per cycle
# is zero; net tool rotation is not.  One subtlety keeps the strokes gentle:
# the centrifugal term ~ m*l*r*sin(tool_angle)*grp_vel^2 whips the tool back
# out at high swing speeds, so fast flailing undoes the ratchet.

obs = env.reset(seed=7, init_angle=0.0, target_angle=np.radians(-50.0))
total = 0.0
print(f"\n{'step':>4} {'phase':>6} {'err[deg]':>9} {'grp[deg]':>9} {'grip[mm]':>9} {'reward':>8}")
last_phase = None
swing_to = 1.3
for k in range(mdp.horizon):
    err, tool_vel, grp_angle, grp_vel, finger = obs
    d = 1.0 if err > 0 else -1.0  # accel sign whose slip shrinks the error
    if abs(err) < np.radians(2.0):
        phase = "settle"
        action = (0.0, -1.0)
    else:
        # PD swing between two gripper set points; gentle on purpose (fast
        # swings raise grp_vel^2 until the centrifugal term out-muscles the
        # inertial one and the slip reverses)
        if abs(grp_angle - swing_to) < 0.25:
            swing_to = -swing_to
        accel = float(np.clip(-1.3 * (grp_angle - swing_to) - 0.33 * grp_vel, -1, 1))
        # the grip gate *is* the ratchet: open exactly while the commanded
        # acceleration slips the tool toward the target, clamp otherwise
        if accel * d > 0.3:
            phase = "slip"
            action = (accel, 1.0)
        else:
            phase = "hold"
            action = (accel, -0.6)
    res = env.step(np.array(action))
    obs = res.obs
    total += res.reward
    if phase != last_phase or k % 16 == 0 or res.done:
        print(
            f"{k:4d} {phase:>6} {np.degrees(obs[0]):9.2f} {np.degrees(obs[2]):9.2f} "
            f"{obs[4] * 1e3:9.2f} {res.reward:8.4f}"
        )
        last_phase = phase
    if res.done:
        outcome = "goal reached" if res.info["goal_reached"] else "horizon expired"
        print(f"\n{outcome} at step {k}; episode return {total:.3f}")
        break

print(
    "\nReward anatomy: each step pays -|angle_error|/pi (hovering a quarter turn "
    "away costs 0.25 per step), and entering the goal region (within 3 deg, tool "
    "settled, fingers actually gripping) pays a one-time +1 and ends the episode. "
    "The hand ratchet needed a stretched 160-step leash and banked about 6 degrees "
    "per swing; trained policies fit the standard 100-step horizon with room to "
    "spare by shaping each stroke instead of bang-banging it."
)
