"""Diagonal-Gaussian MLP policy and value network with hand-written gradients.

All math is plain numpy in 64-bit floats; no autodiff.  Networks are small
tanh MLPs with a linear output layer.  The policy adds a state-independent
learnable ``log_std`` per action dimension.

Parameter flattening order (used by every gradient, the Fisher-vector
product, and the checkpoint format): for each layer in input-to-output order,
the weight matrix in row-major order followed by its bias vector; for the
policy, ``log_std`` is appended last.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MlpSpec",
    "PolicyParams",
    "ValueParams",
    "CheckpointError",
    "init_policy_params",
    "init_value_params",
    "forward_mean",
    "sample_action",
    "log_prob",
    "kl_mean",
    "kl_grad",
    "flatten_policy",
    "unflatten_policy",
    "flatten_value",
    "unflatten_value",
    "value_forward",
    "value_mse",
    "value_mse_grad",
    "save_checkpoint",
    "load_checkpoint",
]

_LOG_2PI = math.log(2.0 * math.pi)
CHECKPOINT_FORMAT = "pivotsim-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True, slots=True)
class MlpSpec:
    """Network shape: full layer sizes from input to output."""

    layer_sizes: tuple[int, ...] = (5, 32, 16, 2)
    hidden_activation: str = "tanh"

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def validate(self) -> list[str]:
        errs = []
        if len(self.layer_sizes) < 3:
            errs.append("layer_sizes: need at least one hidden layer")
        if any(int(s) != s or s < 1 for s in self.layer_sizes):
            errs.append("layer_sizes: all sizes must be positive integers")
        if self.hidden_activation != "tanh":
            errs.append(f"hidden_activation: unsupported {self.hidden_activation!r}")
        return errs


@dataclass(frozen=True, slots=True)
class PolicyParams:
    """Immutable snapshot of policy parameters (treat arrays as read-only)."""

    spec: MlpSpec
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    log_std: np.ndarray


@dataclass(frozen=True, slots=True)
class ValueParams:
    """Immutable snapshot of value-network parameters."""

    spec: MlpSpec
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


# -- initialization ----------------------------------------------------------


def _init_mlp(spec: MlpSpec, rng: np.random.Generator, final_scale: float):
    weights, biases = [], []
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    weights[-1] = weights[-1] * final_scale
    return tuple(weights), tuple(biases)


def init_policy_params(
    spec: MlpSpec,
    rng: np.random.Generator,
    final_scale: float = 0.01,
    log_std_init: float = 0.0,
) -> PolicyParams:
    """Uniform 1/sqrt(fan_in) init; the output layer is shrunk by
    ``final_scale`` so the initial mean action is near zero."""
    w, b = _init_mlp(spec, rng, final_scale)
    return PolicyParams(spec, w, b, np.full(spec.n_outputs, float(log_std_init)))


def init_value_params(spec: MlpSpec, rng: np.random.Generator) -> ValueParams:
    w, b = _init_mlp(spec, rng, 1.0)
    return ValueParams(spec, w, b)


# -- core MLP passes ---------------------------------------------------------


def _forward_acts(weights, biases, x: np.ndarray):
    """Forward pass returning the output and every layer input activation.

    ``acts[l]`` is the input to layer l (acts[0] is the network input); the
    returned output is the final linear layer's pre-activation.
    """
    acts = [x]
    a = x
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w.T + b
        if l < last:
            a = np.tanh(z)
            acts.append(a)
        else:
            return z, acts
    raise AssertionError("unreachable")


def _backward(weights, acts, grad_out: np.ndarray):
    """Backpropagate d(loss)/d(output) to parameter gradients (summed over
    the batch)."""
    d_ws = [None] * len(weights)
    d_bs = [None] * len(weights)
    delta = grad_out
    for l in range(len(weights) - 1, -1, -1):
        d_ws[l] = delta.T @ acts[l]
        d_bs[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ weights[l]) * (1.0 - acts[l] ** 2)
    return d_ws, d_bs


def _jvp(weights, acts, dir_ws, dir_bs):
    """Forward-mode directional derivative of the output w.r.t. parameters."""
    r = np.zeros_like(acts[0])
    last = len(weights) - 1
    for l in range(len(weights)):
        rz = r @ weights[l].T + acts[l] @ dir_ws[l].T + dir_bs[l]
        if l < last:
            r = (1.0 - acts[l + 1] ** 2) * rz
        else:
            return rz
    raise AssertionError("unreachable")


def _net_forward(weights, biases, obs: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    out, _ = _forward_acts(weights, biases, x)
    return out


# -- policy distribution -----------------------------------------------------


def forward_mean(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """Mean action; accepts a single observation or a batch."""
    out = _net_forward(params.weights, params.biases, obs)
    return out[0] if np.ndim(obs) == 1 else out


def sample_action(
    params: PolicyParams, obs: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Draw one action for a single observation; returns (action, log_prob)."""
    mean = forward_mean(params, obs)
    std = np.exp(params.log_std)
    action = mean + std * rng.standard_normal(mean.shape)
    z = (action - mean) / std
    lp = -0.5 * float(z @ z) - float(params.log_std.sum()) - 0.5 * len(std) * _LOG_2PI
    return action, lp


def log_prob(params: PolicyParams, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Log density of ``actions`` under the policy at ``obs`` (batched)."""
    mean = _net_forward(params.weights, params.biases, obs)
    act = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    std = np.exp(params.log_std)
    z = (act - mean) / std
    lp = -0.5 * (z**2).sum(axis=1) - params.log_std.sum() - 0.5 * act.shape[1] * _LOG_2PI
    return lp[0] if np.ndim(actions) == 1 else lp


def kl_mean(old: PolicyParams, new: PolicyParams, obs: np.ndarray) -> float:
    """Mean KL(old || new) over an observation batch, closed form."""
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    mu_old = _net_forward(old.weights, old.biases, x)
    mu_new = _net_forward(new.weights, new.biases, x)
    var_old = np.exp(2.0 * old.log_std)
    var_new = np.exp(2.0 * new.log_std)
    per_dim = (
        new.log_std
        - old.log_std
        + (var_old + (mu_old - mu_new) ** 2) / (2.0 * var_new)
        - 0.5
    )
    return float(per_dim.sum(axis=1).mean())


def kl_grad(old: PolicyParams, new: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """Flat gradient of mean KL(old || new) w.r.t. the new parameters."""
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    n = x.shape[0]
    mu_old = _net_forward(old.weights, old.biases, x)
    out_new, acts = _forward_acts(new.weights, new.biases, x)
    var_old = np.exp(2.0 * old.log_std)
    var_new = np.exp(2.0 * new.log_std)
    diff = out_new - mu_old
    d_ws, d_bs = _backward(new.weights, acts, diff / var_new / n)
    d_log_std = 1.0 - (var_old + (diff**2).mean(axis=0)) / var_new
    return _flatten(d_ws, d_bs, d_log_std)


# -- flatten / unflatten -----------------------------------------------------


def _flatten(weights, biases, log_std=None) -> np.ndarray:
    parts = []
    for w, b in zip(weights, biases):
        parts.append(np.ravel(w))
        parts.append(np.ravel(b))
    if log_std is not None:
        parts.append(np.ravel(log_std))
    return np.concatenate(parts)


def _unflatten(spec: MlpSpec, flat: np.ndarray, with_log_std: bool):
    sizes = spec.layer_sizes
    weights, biases = [], []
    i = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[i : i + fan_out * fan_in].reshape(fan_out, fan_in).copy())
        i += fan_out * fan_in
        biases.append(flat[i : i + fan_out].copy())
        i += fan_out
    log_std = None
    if with_log_std:
        log_std = flat[i : i + sizes[-1]].copy()
        i += sizes[-1]
    if i != flat.size:
        raise ValueError(f"flat vector has {flat.size} entries, expected {i}")
    return tuple(weights), tuple(biases), log_std


def n_params(spec: MlpSpec, with_log_std: bool) -> int:
    sizes = spec.layer_sizes
    n = sum(o * i + o for i, o in zip(sizes[:-1], sizes[1:]))
    return n + sizes[-1] if with_log_std else n


def flatten_policy(params: PolicyParams) -> np.ndarray:
    return _flatten(params.weights, params.biases, params.log_std)


def unflatten_policy(spec: MlpSpec, flat: np.ndarray) -> PolicyParams:
    w, b, ls = _unflatten(spec, np.asarray(flat, dtype=np.float64), True)
    return PolicyParams(spec, w, b, ls)


def flatten_value(params: ValueParams) -> np.ndarray:
    return _flatten(params.weights, params.biases)


def unflatten_value(spec: MlpSpec, flat: np.ndarray) -> ValueParams:
    w, b, _ = _unflatten(spec, np.asarray(flat, dtype=np.float64), False)
    return ValueParams(spec, w, b)


# -- value network -----------------------------------------------------------


def value_forward(params: ValueParams, obs: np.ndarray) -> np.ndarray:
    out = _net_forward(params.weights, params.biases, obs)
    return out[:, 0]


def value_mse(params: ValueParams, obs: np.ndarray, targets: np.ndarray) -> float:
    v = value_forward(params, obs)
    return float(np.mean((v - targets) ** 2))


def value_mse_grad(params: ValueParams, obs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    out, acts = _forward_acts(params.weights, params.biases, x)
    resid = out[:, 0] - targets
    grad_out = (2.0 * resid / x.shape[0])[:, None]
    d_ws, d_bs = _backward(params.weights, acts, grad_out)
    return _flatten(d_ws, d_bs)


# -- checkpoints -------------------------------------------------------------


class CheckpointError(Exception):
    """Raised for malformed or incompatible checkpoint files."""


def _spec_to_dict(spec: MlpSpec) -> dict:
    return {
        "layer_sizes": list(spec.layer_sizes),
        "hidden_activation": spec.hidden_activation,
    }


def _spec_from_dict(d: dict) -> MlpSpec:
    try:
        spec = MlpSpec(tuple(int(s) for s in d["layer_sizes"]), d["hidden_activation"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed network spec: {e}") from e
    errs = spec.validate()
    if errs:
        raise CheckpointError("invalid network spec: " + "; ".join(errs))
    return spec


def save_checkpoint(
    path: str,
    policy: PolicyParams,
    baseline: ValueParams | None = None,
    extra: dict | None = None,
) -> None:
    """Write a checkpoint as canonical JSON (floats round-trip exactly)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "policy_spec": _spec_to_dict(policy.spec),
        "policy_flat": flatten_policy(policy).tolist(),
        "baseline_spec": _spec_to_dict(baseline.spec) if baseline is not None else None,
        "baseline_flat": flatten_value(baseline).tolist() if baseline is not None else None,
        "extra": extra or {},
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    os.replace(tmp, path)


def load_checkpoint(path: str) -> tuple[PolicyParams, ValueParams | None, dict]:
    """Read a checkpoint; raises ``CheckpointError`` on any format problem."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path!r}: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path!r} is not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
    spec = _spec_from_dict(doc.get("policy_spec") or {})
    flat = np.asarray(doc.get("policy_flat"), dtype=np.float64)
    if flat.ndim != 1 or flat.size != n_params(spec, True):
        raise CheckpointError(
            f"policy_flat: expected {n_params(spec, True)} entries, got {flat.size}"
        )
    policy = unflatten_policy(spec, flat)
    baseline = None
    if doc.get("baseline_spec") is not None:
        bspec = _spec_from_dict(doc["baseline_spec"])
        bflat = np.asarray(doc.get("baseline_flat"), dtype=np.float64)
        if bflat.ndim != 1 or bflat.size != n_params(bspec, False):
            raise CheckpointError(
                f"baseline_flat: expected {n_params(bspec, False)} entries, got {bflat.size}"
            )
        baseline = unflatten_value(bspec, bflat)
    extra = doc.get("extra") or {}
    if not isinstance(extra, dict):
        raise CheckpointError("extra: must be a JSON object")
    return policy, baseline, extra
