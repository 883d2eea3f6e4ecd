import numpy as np

from src.ppo.losses import Batch


def compute_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_value: float,
    gamma: float,
    *,
    normalize: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """One-step advantages A_t = r_t + gamma * V(s_t+1) * (1 - done_t) - V(s_t).

    Value targets are A_t + V(s_t) before normalisation. `last_value` bootstraps
    the state after the final transition and is ignored if that transition ended
    an episode.
    """
    next_values = np.append(values[1:], last_value)
    advantages = rewards + gamma * next_values * (1.0 - dones) - values
    targets = advantages + values
    if normalize and len(advantages) > 0:
        advantages = advantages - advantages.mean()
        std = advantages.std()
        if std > 0:
            advantages = advantages / std
    return advantages, targets


class RolloutBuffer:
    def __init__(self, capacity: int, obs_dim: int, action_dim: int = 2):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.actions = np.zeros((capacity, action_dim), dtype=np.float64)
        self.log_probs = np.zeros(capacity, dtype=np.float64)
        self.rewards = np.zeros(capacity, dtype=np.float64)
        self.values = np.zeros(capacity, dtype=np.float64)
        self.dones = np.zeros(capacity, dtype=np.float64)
        self.size = 0

    @property
    def full(self) -> bool:
        return self.size == self.capacity

    def add(
        self, obs: np.ndarray, action: np.ndarray, log_prob: float, reward: float, value: float, done: bool
    ) -> None:
        if self.full:
            raise IndexError(f"rollout buffer is full ({self.capacity} steps)")
        i = self.size
        self.obs[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.values[i] = value
        self.dones[i] = float(done)
        self.size += 1

    def clear(self) -> None:
        self.size = 0

    def to_batch(self, last_value: float, gamma: float) -> Batch:
        if not self.full:
            raise RuntimeError(f"rollout buffer holds {self.size} of {self.capacity} steps")
        advantages, targets = compute_advantages(self.rewards, self.values, self.dones, last_value, gamma)
        return Batch(
            obs=self.obs.copy(),
            actions=self.actions.copy(),
            old_log_probs=self.log_probs.copy(),
            advantages=advantages,
            value_targets=targets,
        )
