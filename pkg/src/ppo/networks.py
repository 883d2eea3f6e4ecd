"""Actor and critic MLPs as flat dictionaries of numpy arrays.

Parameter names: `pi.w{i}` / `pi.b{i}` for the policy mean network, `vf.w{i}` /
`vf.b{i}` for the value network and `log_std` for the state-independent
policy log standard deviation. Weights are stored (fan_in, fan_out).
"""

from dataclasses import dataclass

import numpy as np

Params = dict[str, np.ndarray]

LOG_2PI = float(np.log(2.0 * np.pi))


class DimensionError(ValueError):
    pass


def _orthogonal(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(fan_in, fan_out), min(fan_in, fan_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if fan_in < fan_out:
        q = q.T
    return gain * q[:fan_in, :fan_out]


def init_params(
    obs_dim: int,
    action_dim: int,
    hidden_sizes: tuple[int, ...],
    rng: np.random.Generator,
    *,
    log_std_init: float = 0.0,
) -> Params:
    params: Params = {}
    for prefix, out_dim, out_gain in (("pi", action_dim, 0.01), ("vf", 1, 1.0)):
        sizes = (obs_dim, *hidden_sizes, out_dim)
        last = len(sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            gain = out_gain if i == last else np.sqrt(2.0)
            params[f"{prefix}.w{i}"] = _orthogonal(rng, fan_in, fan_out, gain)
            params[f"{prefix}.b{i}"] = np.zeros(fan_out, dtype=np.float64)
    params["log_std"] = np.full(action_dim, log_std_init, dtype=np.float64)
    return params


def n_layers(params: Params, prefix: str) -> int:
    return sum(1 for name in params if name.startswith(f"{prefix}.w"))


def input_dim(params: Params) -> int:
    return params["pi.w0"].shape[0]


@dataclass
class ForwardCache:
    # layer inputs: the observation batch, then each hidden tanh activation
    inputs: list[np.ndarray]


def mlp_forward(params: Params, prefix: str, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    w0 = params[f"{prefix}.w0"]
    if x.ndim != 2 or x.shape[1] != w0.shape[0]:
        raise DimensionError(f"{prefix}: expected input of shape (batch, {w0.shape[0]}), got {x.shape}")
    h = x
    inputs = [x]
    depth = n_layers(params, prefix)
    for i in range(depth):
        z = h @ params[f"{prefix}.w{i}"] + params[f"{prefix}.b{i}"]
        if i == depth - 1:
            return z, ForwardCache(inputs)
        h = np.tanh(z)
        inputs.append(h)
    raise DimensionError(f"{prefix}: network has no layers")


def mlp_backward(params: Params, prefix: str, cache: ForwardCache, d_out: np.ndarray) -> Params:
    """Gradients of a scalar loss w.r.t. the layer parameters, given dL/d(output)."""
    grads: Params = {}
    d = d_out
    for i in range(n_layers(params, prefix) - 1, -1, -1):
        h_in = cache.inputs[i]
        grads[f"{prefix}.w{i}"] = h_in.T @ d
        grads[f"{prefix}.b{i}"] = d.sum(axis=0)
        if i > 0:
            d = (d @ params[f"{prefix}.w{i}"].T) * (1.0 - h_in**2)
    return grads


def _as_batch(obs: np.ndarray) -> tuple[np.ndarray, bool]:
    obs = np.asarray(obs, dtype=np.float64)
    return (obs[None, :], True) if obs.ndim == 1 else (obs, False)


def policy_forward(params: Params, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(mean, log_std) of the Gaussian policy; a single observation gives a single mean."""
    batch, single = _as_batch(obs)
    mean, _ = mlp_forward(params, "pi", batch)
    return (mean[0] if single else mean), params["log_std"]


def value_forward(params: Params, obs: np.ndarray) -> np.ndarray:
    batch, single = _as_batch(obs)
    value, _ = mlp_forward(params, "vf", batch)
    return value[0, 0] if single else value[:, 0]


def log_prob(action: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Diagonal Gaussian log-density summed over the last axis."""
    z = (action - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z**2 - log_std - 0.5 * LOG_2PI, axis=-1)


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))


@dataclass(frozen=True)
class ActionSample:
    raw: np.ndarray  # pre-clamp draw; log_prob refers to this
    action: np.ndarray  # clamped to [-1, 1], what the environment receives
    log_prob: float
    value: float


def sample_action(
    params: Params, obs: np.ndarray, rng: np.random.Generator | None, *, deterministic: bool = False
) -> ActionSample:
    mean, log_std = policy_forward(params, obs)
    if deterministic or rng is None:
        raw = mean.copy()
    else:
        raw = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    return ActionSample(
        raw=raw,
        action=np.clip(raw, -1.0, 1.0),
        log_prob=float(log_prob(raw, mean, log_std)),
        value=float(value_forward(params, obs)),
    )
