"""Trust-region policy optimization with hand-rolled linear algebra.

Each iteration collects a fixed number of on-policy episodes, computes
Monte-Carlo returns and baseline-subtracted advantages, and maximizes the
importance-weighted surrogate subject to a mean-KL trust region.  The search
direction solves H s = g by conjugate gradient, where H v is an exact
Fisher-vector product (the Gauss-Newton form of the KL Hessian for a
diagonal Gaussian head, plus damping), and the step backtracks until the KL
constraint holds and the surrogate improves.

Per-episode randomness derives from (master seed, global episode index), so
rollouts are reproducible regardless of how episodes are scheduled across
workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .environment import MdpConfig, PivotingEnv, RandomizationConfig
from .dynamics import ArmParams, FrictionParams, ToolParams
from .policy import (
    MlpSpec,
    PolicyParams,
    ValueParams,
    _backward,
    _flatten,
    _forward_acts,
    _jvp,
    _unflatten,
    flatten_policy,
    flatten_value,
    init_policy_params,
    init_value_params,
    kl_mean,
    sample_action,
    unflatten_policy,
    unflatten_value,
    value_forward,
    value_mse,
    value_mse_grad,
)

__all__ = [
    "TrpoConfig",
    "TrajectoryBatch",
    "TrainResult",
    "collect_rollouts",
    "discounted_returns",
    "surrogate",
    "surrogate_grad",
    "fisher_vector_product",
    "conjugate_gradient",
    "trpo_update",
    "fit_baseline",
    "train",
]

_ENV_STREAM = 0
_ACTION_STREAM = 1
_POLICY_INIT_STREAM = 101
_BASELINE_INIT_STREAM = 102
_EVAL_STREAM = 200


@dataclass(frozen=True, slots=True)
class TrpoConfig:
    """Optimizer constants.

    ``kl_step`` is the trust-region radius (mean KL per update).  The
    baseline is fitted to Monte-Carlo returns by full-batch gradient descent
    whose learning rate is halved whenever a step would increase the MSE.
    """

    kl_step: float = 0.01
    cg_iters: int = 10
    cg_damping: float = 0.1
    cg_residual_tol: float = 1e-10
    backtrack_ratio: float = 0.8
    backtrack_steps: int = 10
    episodes_per_iter: int = 50
    discount: float = 0.99
    advantage_normalize: bool = True
    use_baseline: bool = True
    baseline_epochs: int = 40
    baseline_learn_rate: float = 1e-2

    def validate(self) -> list[str]:
        errs = []
        if not (0.0 < self.kl_step):
            errs.append("kl_step: must be > 0")
        if self.cg_iters < 1:
            errs.append("cg_iters: must be >= 1")
        if self.cg_damping < 0.0:
            errs.append("cg_damping: must be >= 0")
        if not (self.cg_residual_tol > 0.0):
            errs.append("cg_residual_tol: must be > 0")
        if not (0.0 < self.backtrack_ratio < 1.0):
            errs.append("backtrack_ratio: must be in (0, 1)")
        if self.backtrack_steps < 1:
            errs.append("backtrack_steps: must be >= 1")
        if self.episodes_per_iter < 1:
            errs.append("episodes_per_iter: must be >= 1")
        if not (0.0 < self.discount < 1.0):
            errs.append("discount: must be in (0, 1)")
        if self.baseline_epochs < 0:
            errs.append("baseline_epochs: must be >= 0")
        if not (self.baseline_learn_rate > 0.0):
            errs.append("baseline_learn_rate: must be > 0")
        return errs


@dataclass(slots=True)
class TrajectoryBatch:
    """Flat per-step arrays for one batch of episodes, plus per-episode stats.

    ``log_probs`` are the sampling-time log densities (the behavior policy);
    ``returns`` are discounted reward-to-go values; ``advantages`` start as a
    copy of ``returns`` and are overwritten by the training loop once the
    baseline is subtracted/normalized.
    """

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    log_probs: np.ndarray
    returns: np.ndarray
    advantages: np.ndarray
    episode_lengths: np.ndarray
    episode_rewards: np.ndarray
    episode_reached: np.ndarray
    episode_steps_to_goal: np.ndarray

    @property
    def n_steps(self) -> int:
        return int(self.obs.shape[0])

    @property
    def n_episodes(self) -> int:
        return int(self.episode_lengths.shape[0])


def discounted_returns(
    rewards: np.ndarray,
    discount: float,
    episode_lengths: np.ndarray | None = None,
) -> np.ndarray:
    """Discounted reward-to-go per step; episodes are independent segments."""
    r = np.asarray(rewards, dtype=np.float64)
    if episode_lengths is None:
        episode_lengths = np.array([r.shape[0]])
    out = np.empty_like(r)
    start = 0
    for n in episode_lengths:
        acc = 0.0
        for t in range(start + int(n) - 1, start - 1, -1):
            acc = r[t] + discount * acc
            out[t] = acc
        start += int(n)
    return out


def _run_episode(env: PivotingEnv, params: PolicyParams, env_seed, action_seed):
    obs = env.reset(seed=env_seed)
    rng = np.random.default_rng(action_seed)
    obs_l, act_l, rew_l, lp_l = [], [], [], []
    reached = False
    done = False
    while not done:
        o = obs.as_array()
        a, lp = sample_action(params, o, rng)
        obs_next, reward, done, info = env.step(a)
        obs_l.append(o)
        act_l.append(a)
        rew_l.append(reward)
        lp_l.append(lp)
        if info["goal_reached"]:
            reached = True
        obs = obs_next
    return obs_l, act_l, rew_l, lp_l, reached


def collect_rollouts(
    env: PivotingEnv,
    params: PolicyParams,
    n_episodes: int,
    seed: int,
    discount: float = 0.99,
    episode_offset: int = 0,
) -> TrajectoryBatch:
    """Sample ``n_episodes`` on-policy episodes into one flat batch.

    Episode i draws its environment and action streams from
    (seed, episode_offset + i), independent of collection order.
    """
    obs_l, act_l, rew_l, lp_l = [], [], [], []
    lengths, ep_rewards, ep_reached, ep_steps = [], [], [], []
    horizon = env.mdp.horizon
    for i in range(n_episodes):
        idx = episode_offset + i
        o, a, r, lp, reached = _run_episode(
            env, params, (seed, idx, _ENV_STREAM), (seed, idx, _ACTION_STREAM)
        )
        obs_l.extend(o)
        act_l.extend(a)
        rew_l.extend(r)
        lp_l.extend(lp)
        lengths.append(len(r))
        ep_rewards.append(sum(r))
        ep_reached.append(reached)
        ep_steps.append(len(r) if reached else horizon)
    lengths = np.asarray(lengths, dtype=np.int64)
    rewards = np.asarray(rew_l, dtype=np.float64)
    returns = discounted_returns(rewards, discount, lengths)
    return TrajectoryBatch(
        obs=np.asarray(obs_l, dtype=np.float64),
        actions=np.asarray(act_l, dtype=np.float64),
        rewards=rewards,
        log_probs=np.asarray(lp_l, dtype=np.float64),
        returns=returns,
        advantages=returns.copy(),
        episode_lengths=lengths,
        episode_rewards=np.asarray(ep_rewards, dtype=np.float64),
        episode_reached=np.asarray(ep_reached, dtype=bool),
        episode_steps_to_goal=np.asarray(ep_steps, dtype=np.int64),
    )


# -- surrogate objective -----------------------------------------------------


def _policy_forward_acts(params: PolicyParams, obs: np.ndarray):
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    return _forward_acts(params.weights, params.biases, x)


def _ratios(params: PolicyParams, batch: TrajectoryBatch, mean: np.ndarray) -> np.ndarray:
    std = np.exp(params.log_std)
    z = (batch.actions - mean) / std
    lp = (
        -0.5 * (z**2).sum(axis=1)
        - params.log_std.sum()
        - 0.5 * batch.actions.shape[1] * _LOG_2PI_CONST
    )
    with np.errstate(over="ignore"):
        return np.exp(lp - batch.log_probs)


_LOG_2PI_CONST = math.log(2.0 * math.pi)


def surrogate(params: PolicyParams, batch: TrajectoryBatch) -> float:
    """Importance-weighted advantage estimate E[ratio * A] over the batch."""
    mean, _ = _policy_forward_acts(params, batch.obs)
    return float(np.mean(_ratios(params, batch, mean) * batch.advantages))


def surrogate_grad(params: PolicyParams, batch: TrajectoryBatch) -> np.ndarray:
    """Flat-parameter gradient of the surrogate at ``params``."""
    mean, acts = _policy_forward_acts(params, batch.obs)
    ratios = _ratios(params, batch, mean)
    n = batch.n_steps
    std = np.exp(params.log_std)
    diff = batch.actions - mean
    w = (ratios * batch.advantages / n)[:, None]
    grad_mean = w * diff / std**2
    d_ws, d_bs = _backward(params.weights, acts, grad_mean)
    d_log_std = (w * ((diff / std) ** 2 - 1.0)).sum(axis=0)
    return _flatten(d_ws, d_bs, d_log_std)


def fisher_vector_product(
    params: PolicyParams, obs: np.ndarray, v: np.ndarray, damping: float = 0.0
) -> np.ndarray:
    """Exact (Gauss-Newton) Hessian-vector product of mean KL at ``params``.

    For a diagonal Gaussian head with state-independent log stds the KL
    Hessian at the expansion point is J^T diag(1/sigma^2) J on the mean path
    plus 2 I on the log-std block, with no curvature cross terms.
    """
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    n = x.shape[0]
    dir_ws, dir_bs, dir_ls = _unflatten(params.spec, np.asarray(v, dtype=np.float64), True)
    _, acts = _forward_acts(params.weights, params.biases, x)
    r_mean = _jvp(params.weights, acts, dir_ws, dir_bs)
    var = np.exp(2.0 * params.log_std)
    d_ws, d_bs = _backward(params.weights, acts, r_mean / var / n)
    out = _flatten(d_ws, d_bs, 2.0 * dir_ls)
    if damping:
        out = out + damping * np.asarray(v, dtype=np.float64)
    return out


def conjugate_gradient(apply_op, b: np.ndarray, iters: int = 10, tol: float = 1e-10) -> np.ndarray:
    """Solve A x = b for SPD operator A given as ``apply_op``; stops early
    when the residual norm falls below ``tol * max(1, |b|)``."""
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    r2 = float(r @ r)
    stop = (tol * max(1.0, math.sqrt(float(b @ b)))) ** 2
    for _ in range(iters):
        if r2 <= stop:
            break
        ap = apply_op(p)
        alpha = r2 / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        r2_new = float(r @ r)
        p = r + (r2_new / r2) * p
        r2 = r2_new
    return x


def trpo_update(
    params: PolicyParams, batch: TrajectoryBatch, cfg: TrpoConfig
) -> tuple[PolicyParams, dict]:
    """One trust-region step; returns the (possibly unchanged) parameters and
    diagnostics.  The step is accepted only if mean KL stays within
    ``kl_step`` and the surrogate strictly improves; otherwise the old
    parameters are returned with ``step_accepted`` False."""
    diag = {
        "step_accepted": False,
        "mean_kl": 0.0,
        "surrogate_improvement": 0.0,
        "backtracks": 0,
        "reason": "",
    }
    g = surrogate_grad(params, batch)
    gnorm = float(np.linalg.norm(g))
    diag["grad_norm"] = gnorm
    if not math.isfinite(gnorm) or gnorm < 1e-12:
        diag["reason"] = "degenerate gradient"
        return params, diag

    def fvp(v):
        return fisher_vector_product(params, batch.obs, v, cfg.cg_damping)

    s = conjugate_gradient(fvp, g, cfg.cg_iters, cfg.cg_residual_tol)
    shs = float(s @ fvp(s))
    if not math.isfinite(shs) or shs <= 0.0:
        diag["reason"] = "non-positive curvature"
        return params, diag
    beta = math.sqrt(2.0 * cfg.kl_step / shs)

    old_surr = surrogate(params, batch)
    flat_old = flatten_policy(params)
    scale = beta
    for i in range(cfg.backtrack_steps):
        cand = unflatten_policy(params.spec, flat_old + scale * s)
        kl = kl_mean(params, cand, batch.obs)
        surr = surrogate(cand, batch)
        if math.isfinite(kl) and math.isfinite(surr) and kl <= cfg.kl_step and surr > old_surr:
            diag.update(
                step_accepted=True,
                mean_kl=kl,
                surrogate_improvement=surr - old_surr,
                backtracks=i,
                step_scale=scale,
            )
            return cand, diag
        scale *= cfg.backtrack_ratio
    diag["reason"] = "line search exhausted"
    return params, diag


def fit_baseline(
    value_params: ValueParams, batch: TrajectoryBatch, cfg: TrpoConfig
) -> ValueParams:
    """Full-batch gradient-descent regression of the value net onto returns.

    The learning rate is halved until a step does not increase the training
    MSE, so the loss is non-increasing across epochs; zero epochs or a
    zero-gradient (perfect) fit leave the parameters unchanged.
    """
    if cfg.baseline_epochs <= 0:
        return value_params
    obs, targets = batch.obs, batch.returns
    flat = flatten_value(value_params)
    spec = value_params.spec
    lr = cfg.baseline_learn_rate
    params = value_params
    mse = value_mse(params, obs, targets)
    for _ in range(cfg.baseline_epochs):
        grad = value_mse_grad(params, obs, targets)
        if float(np.linalg.norm(grad)) == 0.0:
            break
        improved = False
        for _ in range(60):
            cand_flat = flat - lr * grad
            cand = unflatten_value(spec, cand_flat)
            cand_mse = value_mse(cand, obs, targets)
            if cand_mse <= mse:
                flat, params, mse = cand_flat, cand, cand_mse
                improved = True
                break
            lr *= 0.5
        if not improved:
            break
    return params


# -- training loop -----------------------------------------------------------


@dataclass(slots=True)
class TrainResult:
    policy: PolicyParams
    baseline: ValueParams | None
    log_rows: list = field(default_factory=list)
    eval_rows: list = field(default_factory=list)
    iterations_run: int = 0
    stopped_early: bool = False


def _worker_collect(args):
    (tool, fric, arm, mdp, rand, spec, flat, seed, discount, indices) = args
    env = PivotingEnv(tool, fric, arm, mdp, rand)
    params = unflatten_policy(spec, flat)
    out = []
    for idx in indices:
        out.append(
            (idx, _run_episode(env, params, (seed, idx, _ENV_STREAM), (seed, idx, _ACTION_STREAM)))
        )
    return out


def _collect_parallel(
    pool, workers, tool, fric, arm, mdp, rand, params, n_episodes, seed, discount, episode_offset
) -> TrajectoryBatch:
    indices = list(range(episode_offset, episode_offset + n_episodes))
    chunks = [indices[i::workers] for i in range(workers)]
    flat = flatten_policy(params)
    futures = [
        pool.submit(
            _worker_collect,
            (tool, fric, arm, mdp, rand, params.spec, flat, seed, discount, chunk),
        )
        for chunk in chunks
        if chunk
    ]
    episodes = {}
    for fut in futures:
        for idx, ep in fut.result():
            episodes[idx] = ep
    obs_l, act_l, rew_l, lp_l = [], [], [], []
    lengths, ep_rewards, ep_reached, ep_steps = [], [], [], []
    for idx in indices:
        o, a, r, lp, reached = episodes[idx]
        obs_l.extend(o)
        act_l.extend(a)
        rew_l.extend(r)
        lp_l.extend(lp)
        lengths.append(len(r))
        ep_rewards.append(sum(r))
        ep_reached.append(reached)
        ep_steps.append(len(r) if reached else mdp.horizon)
    lengths = np.asarray(lengths, dtype=np.int64)
    rewards = np.asarray(rew_l, dtype=np.float64)
    returns = discounted_returns(rewards, discount, lengths)
    return TrajectoryBatch(
        obs=np.asarray(obs_l, dtype=np.float64),
        actions=np.asarray(act_l, dtype=np.float64),
        rewards=rewards,
        log_probs=np.asarray(lp_l, dtype=np.float64),
        returns=returns,
        advantages=returns.copy(),
        episode_lengths=lengths,
        episode_rewards=np.asarray(ep_rewards, dtype=np.float64),
        episode_reached=np.asarray(ep_reached, dtype=bool),
        episode_steps_to_goal=np.asarray(ep_steps, dtype=np.int64),
    )


def train(
    tool: ToolParams,
    fric: FrictionParams,
    arm: ArmParams,
    mdp: MdpConfig,
    rand: RandomizationConfig,
    policy_spec: MlpSpec,
    cfg: TrpoConfig,
    iterations: int,
    master_seed: int = 0,
    eval_protocol=None,
    eval_every: int = 0,
    target_success: float | None = None,
    workers: int = 1,
    start_policy: PolicyParams | None = None,
    start_baseline: ValueParams | None = None,
    start_iteration: int = 0,
    on_iteration=None,
    on_eval=None,
    on_checkpoint=None,
    checkpoint_every: int = 0,
) -> TrainResult:
    """Run TRPO for up to ``iterations`` total iterations.

    Optional callbacks receive per-iteration log rows, periodic evaluation
    rows, and checkpoint snapshots; ``target_success`` stops training early
    once a periodic evaluation reaches that success rate.
    """
    env = PivotingEnv(tool, fric, arm, mdp, rand)
    policy = (
        start_policy
        if start_policy is not None
        else init_policy_params(policy_spec, np.random.default_rng((master_seed, _POLICY_INIT_STREAM)))
    )
    baseline = start_baseline
    if cfg.use_baseline and baseline is None:
        bspec = MlpSpec(policy_spec.layer_sizes[:-1] + (1,), policy_spec.hidden_activation)
        baseline = init_value_params(bspec, np.random.default_rng((master_seed, _BASELINE_INIT_STREAM)))

    result = TrainResult(policy=policy, baseline=baseline)
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers)
    try:
        for it in range(start_iteration, iterations):
            t0 = time.perf_counter()
            offset = it * cfg.episodes_per_iter
            if pool is not None:
                batch = _collect_parallel(
                    pool, workers, tool, fric, arm, mdp, rand, policy,
                    cfg.episodes_per_iter, master_seed, cfg.discount, offset,
                )
            else:
                batch = collect_rollouts(
                    env, policy, cfg.episodes_per_iter, master_seed, cfg.discount, offset
                )

            adv = batch.returns.copy()
            if cfg.use_baseline:
                adv -= value_forward(baseline, batch.obs)
            if cfg.advantage_normalize:
                std = float(adv.std())
                adv = (adv - adv.mean()) / (std if std > 1e-12 else 1.0)
            batch.advantages = adv

            policy, diag = trpo_update(policy, batch, cfg)
            if cfg.use_baseline:
                baseline = fit_baseline(baseline, batch, cfg)

            row = {
                "iteration": it,
                "avg_return": float(batch.episode_rewards.mean()),
                "avg_steps_to_goal": float(batch.episode_steps_to_goal.mean()),
                "success_rate": float(batch.episode_reached.mean()),
                "mean_kl": diag["mean_kl"],
                "surrogate_improvement": diag["surrogate_improvement"],
                "step_accepted": diag["step_accepted"],
                "wall_time_s": time.perf_counter() - t0,
            }
            result.log_rows.append(row)
            if on_iteration is not None:
                on_iteration(row)

            result.policy, result.baseline = policy, baseline
            result.iterations_run = it + 1

            if checkpoint_every and on_checkpoint is not None and (it + 1) % checkpoint_every == 0:
                on_checkpoint(it + 1, policy, baseline)

            if eval_protocol is not None and eval_every and (it + 1) % eval_every == 0:
                from .evaluation import evaluate

                metrics = evaluate(
                    policy, tool, fric, arm, mdp, eval_protocol, seed=(master_seed, _EVAL_STREAM)
                )
                erow = {
                    "iteration": it,
                    "avg_reward": metrics["avg_reward"],
                    "avg_steps_to_goal": metrics["avg_steps_to_goal"],
                    "success_rate": metrics["success_rate"],
                }
                result.eval_rows.append(erow)
                if on_eval is not None:
                    on_eval(erow)
                if target_success is not None and metrics["success_rate"] >= target_success:
                    result.stopped_early = True
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    return result
