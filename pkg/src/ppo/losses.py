"""PPO losses with hand-derived gradients.

Every loss is written as a quantity to minimise:

    total = surrogate + vf_coef * value + ent_coef * entropy

where `surrogate` is the negated clipped objective and `entropy` is the
negated Gaussian entropy, so a positive ent_coef rewards exploration.
"""

from dataclasses import dataclass

import numpy as np

from src.config import PpoConfig
from src.ppo.networks import Params, gaussian_entropy, log_prob, mlp_backward, mlp_forward


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray  # pre-clamp raw actions
    old_log_probs: np.ndarray
    advantages: np.ndarray
    value_targets: np.ndarray

    def __len__(self) -> int:
        return len(self.obs)

    def subset(self, idx: np.ndarray) -> "Batch":
        return Batch(
            obs=self.obs[idx],
            actions=self.actions[idx],
            old_log_probs=self.old_log_probs[idx],
            advantages=self.advantages[idx],
            value_targets=self.value_targets[idx],
        )


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    surrogate: float
    value: float
    entropy: float


def probability_ratios(params: Params, batch: Batch) -> np.ndarray:
    mean, _ = mlp_forward(params, "pi", batch.obs)
    return np.exp(log_prob(batch.actions, mean, params["log_std"]) - batch.old_log_probs)


def clipped_surrogate_loss(params: Params, batch: Batch, clip_range: float) -> tuple[float, Params]:
    mean, cache = mlp_forward(params, "pi", batch.obs)
    log_std = params["log_std"]
    ratio = np.exp(log_prob(batch.actions, mean, log_std) - batch.old_log_probs)
    adv = batch.advantages
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range) * adv
    loss = -float(np.mean(np.minimum(unclipped, clipped)))

    # the clipped branch only wins outside the clip interval, where it is flat in the ratio
    d_ratio = np.where(unclipped <= clipped, adv, 0.0)
    d_logp = -d_ratio * ratio / len(batch)
    var = np.exp(2.0 * log_std)
    diff = batch.actions - mean
    grads = mlp_backward(params, "pi", cache, d_logp[:, None] * diff / var)
    grads["log_std"] = np.sum(d_logp[:, None] * (diff**2 / var - 1.0), axis=0)
    return loss, grads


def value_loss(params: Params, batch: Batch) -> tuple[float, Params]:
    value, cache = mlp_forward(params, "vf", batch.obs)
    err = value[:, 0] - batch.value_targets
    loss = float(np.mean(err**2))
    grads = mlp_backward(params, "vf", cache, (2.0 * err / len(batch))[:, None])
    return loss, grads


def entropy_loss(params: Params, batch: Batch | None = None) -> tuple[float, Params]:
    """Negative policy entropy. The std does not depend on the state, so the batch average is the closed form."""
    log_std = params["log_std"]
    return -gaussian_entropy(log_std), {"log_std": -np.ones_like(log_std)}


def total_loss(params: Params, batch: Batch, cfg: PpoConfig) -> tuple[LossBreakdown, Params]:
    surrogate, g_pi = clipped_surrogate_loss(params, batch, cfg.clip_range)
    vf, g_vf = value_loss(params, batch)
    ent, g_ent = entropy_loss(params, batch)

    grads = {name: np.zeros_like(p) for name, p in params.items()}
    for name, g in g_pi.items():
        grads[name] += g
    for name, g in g_vf.items():
        grads[name] += cfg.vf_coef * g
    for name, g in g_ent.items():
        grads[name] += cfg.ent_coef * g

    total = surrogate + cfg.vf_coef * vf + cfg.ent_coef * ent
    return LossBreakdown(total=total, surrogate=surrogate, value=vf, entropy=ent), grads
